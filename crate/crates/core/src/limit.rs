//! Brownian sampling, occupation integrals, the limit functional `Z`, the
//! partial-sum approximant `Γ_m`, the time change `t(m)` and the diagnostics
//! comparing the corrected walk with its Brownian limit.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::coupling::{build_coupled_walk, CoupledWalk};
use crate::effective::{EffectiveTrajectory, IncrementLaw};
use crate::lattice::{LatticeKind, PlanePoint};
use crate::prudent::{PrudentPath, PrudentWalker};
use crate::rng::{stream_key, CounterRng};
use crate::stats::{bootstrap_stderr, linear_fit, mean};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("horizon {requested} exceeds the sampled horizon {available}")]
    HorizonExceeded { requested: f64, available: f64 },
    #[error("{0} is outside [0, 1]")]
    Domain(f64),
    #[error("invalid Brownian grid: horizon {horizon}, grid step {grid_step}")]
    InvalidGrid { horizon: f64, grid_step: f64 },
}

/// Standard deviation of one effective-walk increment.
pub const SIGMA: f64 = 2.0;

/// Number of grid cells covering `[0, horizon]`, treating ratios within
/// rounding noise of an integer as that integer.
fn cell_count(horizon: f64, grid_step: f64) -> usize {
    let r = horizon / grid_step;
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        r.ceil() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    pub grid_step: f64,
    /// `W(0) = 0, W(Δs), W(2Δs), …`.
    pub values: Vec<f64>,
    pub seed: u64,
}

impl BrownianPath {
    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.grid_step
    }
}

/// Euler construction on `⌈horizon / grid_step⌉` cells.
pub fn sample_brownian(horizon: f64, grid_step: f64, seed: u64) -> Result<BrownianPath, LimitError> {
    if !(horizon > 0.0 && grid_step > 0.0 && grid_step <= horizon) {
        return Err(LimitError::InvalidGrid { horizon, grid_step });
    }
    let n = cell_count(horizon, grid_step);
    let mut rng = CounterRng::new(seed);
    let scale = grid_step.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += scale * z;
        values.push(w);
    }
    Ok(BrownianPath { grid_step, values, seed })
}

/// Time spent below, exactly at and above zero on `[0, horizon]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Occupation {
    pub below: f64,
    pub at_zero: f64,
    pub above: f64,
}

/// Left-endpoint sums: cell `[iΔ, (i+1)Δ) ∩ [0, horizon]` goes to the class of
/// `W(iΔ)`. The three parts add up to `horizon` exactly in floating point
/// (summed in the order below, at zero, above).
pub fn occupation_integrals(w: &BrownianPath, horizon: f64) -> Result<Occupation, LimitError> {
    let n = cell_count(horizon, w.grid_step);
    if n > w.values.len() - 1 {
        return Err(LimitError::HorizonExceeded {
            requested: horizon,
            available: w.horizon(),
        });
    }
    if n == 0 {
        return Ok(Occupation {
            below: 0.0,
            at_zero: 0.0,
            above: 0.0,
        });
    }
    let mut counts = [0u64; 3];
    for &v in &w.values[..n - 1] {
        counts[class(v)] += 1;
    }
    let last_class = class(w.values[n - 1]);
    let last_width = horizon - (n - 1) as f64 * w.grid_step;
    let mut parts = [0.0; 3];
    for c in 0..3 {
        parts[c] = counts[c] as f64 * w.grid_step;
    }
    parts[last_class] += last_width;
    // Snap the parts to multiples of one ulp of `horizon`; every partial sum
    // is then representable and the last occupied class takes the exact
    // remainder.
    let quantum = horizon.next_up() - horizon;
    let last = (0..3).rev().find(|&c| parts[c] > 0.0).unwrap_or(2);
    for part in &mut parts[..last] {
        *part = (*part / quantum).round() * quantum;
    }
    parts[last] = horizon - parts[..last].iter().sum::<f64>();
    Ok(Occupation {
        below: parts[0],
        at_zero: parts[1],
        above: parts[2],
    })
}

fn class(v: f64) -> usize {
    if v < 0.0 {
        0
    } else if v == 0.0 {
        1
    } else {
        2
    }
}

/// `Z^{σ1,σ2,σ3}_{u,α}` as coefficients along `(e1, e2, e3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitFunctional {
    pub value: [f64; 3],
    pub u: f64,
    pub alpha: f64,
    pub sigma: [f64; 3],
}

const E1: [f64; 3] = [0.866_025_403_784_438_6, 0.5, 0.0];
const E2: [f64; 3] = [0.866_025_403_784_438_6, -0.5, 0.0];
const E3: [f64; 3] = [0.0, 0.0, 1.0];

impl LimitFunctional {
    /// The vector in ambient coordinates, `Σ value_i e_i`.
    pub fn cartesian(&self) -> [f64; 3] {
        let [c1, c2, c3] = self.value;
        [0, 1, 2].map(|i| c1 * E1[i] + c2 * E2[i] + c3 * E3[i])
    }

    /// Orthogonal projection onto the lattice plane (`e3` maps to zero).
    pub fn plane_projection(&self) -> PlanePoint {
        let [x, y, _] = self.cartesian();
        PlanePoint::new(x, y)
    }

    pub fn l1_norm(&self) -> f64 {
        self.value.iter().map(|v| v.abs()).sum()
    }
}

pub fn z_functional(w: &BrownianPath, sigma: [f64; 3], u: f64, alpha: f64) -> Result<LimitFunctional, LimitError> {
    let horizon = alpha * u;
    if horizon > w.horizon() * (1.0 + 1e-12) {
        return Err(LimitError::HorizonExceeded {
            requested: horizon,
            available: w.horizon(),
        });
    }
    let occ = occupation_integrals(w, horizon)?;
    Ok(LimitFunctional {
        value: [sigma[0] * occ.below, sigma[1] * occ.at_zero, sigma[2] * occ.above],
        u,
        alpha,
        sigma,
    })
}

/// Plane vectors added to `Γ` when `Ŝ_i` is negative, zero and positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepVectors {
    pub neg: PlanePoint,
    pub zero: PlanePoint,
    pub pos: PlanePoint,
}

impl StepVectors {
    /// `(e1, e2, e3)` embedded in the plane, `e3` projecting to zero; the
    /// square lattice uses the two coordinate axes.
    pub fn default_for(kind: LatticeKind) -> Self {
        match kind {
            LatticeKind::Triangular => Self {
                neg: PlanePoint::new(E1[0], E1[1]),
                zero: PlanePoint::new(E2[0], E2[1]),
                pos: PlanePoint::new(0.0, 0.0),
            },
            LatticeKind::Square => Self {
                neg: PlanePoint::new(1.0, 0.0),
                zero: PlanePoint::new(0.0, 0.0),
                pos: PlanePoint::new(0.0, 1.0),
            },
        }
    }

    /// Step vector for a value of the corrected walk, by its sign.
    pub fn pick(&self, v: i64) -> PlanePoint {
        match v.signum() {
            -1 => self.neg,
            0 => self.zero,
            _ => self.pos,
        }
    }
}

/// `Γ_m = Σ_{i <= m} v(sign Ŝ_i)`.
pub fn gamma_m(coupled: &CoupledWalk, m: usize, vectors: StepVectors) -> PlanePoint {
    assert!(m < coupled.s_hat.len(), "m = {m} beyond the trajectory");
    coupled.s_hat[1..=m]
        .iter()
        .fold(PlanePoint::new(0.0, 0.0), |acc, &v| acc + vectors.pick(v))
}

/// `Γ_0 .. Γ_n`.
pub fn gamma_path(coupled: &CoupledWalk, vectors: StepVectors) -> Vec<PlanePoint> {
    let mut acc = PlanePoint::new(0.0, 0.0);
    let mut out = Vec::with_capacity(coupled.s_hat.len());
    out.push(acc);
    for &v in &coupled.s_hat[1..] {
        acc = acc + vectors.pick(v);
        out.push(acc);
    }
    out
}

/// `(m, t(m))`: the `m`-th step of the prudent walk that widens or heightens
/// its box happens at time `t(m)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeChange {
    pub pairs: Vec<(u64, u64)>,
}

/// Online version of [`time_change`] fed one box at a time.
#[derive(Clone, Debug)]
pub struct GrowthClock {
    last: (i64, i64),
    time: u64,
    pub pairs: Vec<(u64, u64)>,
}

impl GrowthClock {
    pub fn new() -> Self {
        Self {
            last: (1, 1),
            time: 0,
            pairs: Vec::new(),
        }
    }

    /// Box size after the next step.
    #[inline]
    pub fn observe(&mut self, width: i64, height: i64) {
        self.time += 1;
        if width > self.last.0 || height > self.last.1 {
            let m = self.pairs.len() as u64 + 1;
            self.pairs.push((m, self.time));
        }
        self.last = (width, height);
    }
}

impl Default for GrowthClock {
    fn default() -> Self {
        Self::new()
    }
}

pub fn time_change(path: &PrudentPath) -> TimeChange {
    let mut clock = GrowthClock::new();
    for (w, h) in path.extents().into_iter().skip(1) {
        clock.observe(w, h);
    }
    TimeChange { pairs: clock.pairs }
}

/// Least-squares slope of `t(m)` against `m`.
pub fn time_change_slope(pairs: &[(u64, u64)]) -> Option<f64> {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
    linear_fit(&xs, &ys).ok().map(|f| f.slope)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub kind: LatticeKind,
    pub value: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_steps: usize,
    pub slopes: Vec<f64>,
    pub trapped: usize,
    pub seed: u64,
}

impl AlphaEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn covers(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// One `t(m)` sequence from a fresh walk of `n_steps` steps on stream `stream` of `seed`.
pub fn simulate_time_change(kind: LatticeKind, n_steps: usize, seed: u64, stream: u64) -> (TimeChange, bool) {
    let mut rng = CounterRng::stream(seed, stream);
    let mut walker = PrudentWalker::new(kind);
    let mut clock = GrowthClock::new();
    for _ in 0..n_steps {
        if walker.step(&mut rng).is_err() {
            return (TimeChange { pairs: clock.pairs }, true);
        }
        clock.observe(walker.width(), walker.height());
    }
    (TimeChange { pairs: clock.pairs }, false)
}

/// Mean over `n_runs` walks of the per-walk least-squares slope of `t(m)`
/// against `m`, with a bootstrap standard error and a normal 95% interval.
pub fn estimate_alpha(kind: LatticeKind, n_steps: usize, n_runs: usize, seed: u64) -> AlphaEstimate {
    let runs: Vec<(Option<f64>, bool)> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let (tc, trapped) = simulate_time_change(kind, n_steps, seed, i);
            (time_change_slope(&tc.pairs), trapped)
        })
        .collect();
    let trapped = runs.iter().filter(|r| r.1).count();
    let slopes: Vec<f64> = runs.iter().filter_map(|r| r.0).collect();
    let value = mean(&slopes);
    let stderr = bootstrap_stderr(&slopes, BOOTSTRAP_RESAMPLES, stream_key(seed, u64::MAX));
    AlphaEstimate {
        kind,
        value,
        stderr,
        ci_low: value - 1.96 * stderr,
        ci_high: value + 1.96 * stderr,
        n_steps,
        slopes,
        trapped,
        seed,
    }
}

/// `(2/π) arcsin(√x)`.
pub fn arcsine_cdf(x: f64) -> Result<f64, LimitError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(LimitError::Domain(x));
    }
    Ok(std::f64::consts::FRAC_2_PI * x.sqrt().asin())
}

/// A corrected walk together with a Brownian walk `B_0 .. B_n` on the integer
/// grid. Both are driven by the same uniforms: `ξ_i = F^{-1}(U_i)` and
/// `B_i - B_{i-1} = Φ^{-1}(U_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSample {
    pub coupled: CoupledWalk,
    pub brownian: Vec<f64>,
}

pub fn coupled_sample(n: usize, seed: u64) -> CoupledSample {
    let normal = Normal::standard();
    let mut rng = CounterRng::new(seed);
    let mut increments = Vec::with_capacity(n);
    let mut brownian = Vec::with_capacity(n + 1);
    let mut b = 0.0;
    brownian.push(b);
    for _ in 0..n {
        let u = rng.uniform();
        increments.push(IncrementLaw::quantile(u));
        b += normal.inverse_cdf(u.max(f64::MIN_POSITIVE));
        brownian.push(b);
    }
    let s = EffectiveTrajectory::from_increments(seed, increments);
    CoupledSample {
        coupled: build_coupled_walk(s),
        brownian,
    }
}

/// `sup_k |S_k - Ŝ_k|`.
pub fn lemma3_on(c: &CoupledWalk) -> f64 {
    c.s.values
        .iter()
        .zip(&c.s_hat)
        .map(|(s, h)| (s - h).unsigned_abs())
        .max()
        .unwrap_or(0) as f64
}

/// `sup_k |(1/n) Σ_{i<=k} (1{Ŝ_i >= 0} - 1{S_i >= threshold})|`.
pub fn lemma4_upper_on(c: &CoupledWalk, threshold: f64) -> f64 {
    sup_partial_sum(c, |hat, s| (hat >= 0) as i64 - (s as f64 >= threshold) as i64)
}

/// `sup_k |(1/n) Σ_{i<=k} (1{Ŝ_i < 0} - 1{S_i < threshold})|`.
pub fn lemma4_lower_on(c: &CoupledWalk, threshold: f64) -> f64 {
    sup_partial_sum(c, |hat, s| (hat < 0) as i64 - ((s as f64) < threshold) as i64)
}

fn sup_partial_sum<F: Fn(i64, i64) -> i64>(c: &CoupledWalk, term: F) -> f64 {
    let n = c.len();
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0i64;
    let mut sup = 0i64;
    for i in 1..=n {
        acc += term(c.s_hat[i], c.s.values[i]);
        sup = sup.max(acc.abs());
    }
    sup as f64 / n as f64
}

/// `sup_k |Ŝ_k - σ B_k|`.
pub fn lemma5_on(sample: &CoupledSample, sigma: f64) -> f64 {
    sample
        .coupled
        .s_hat
        .iter()
        .zip(&sample.brownian)
        .map(|(&h, &b)| (h as f64 - sigma * b).abs())
        .fold(0.0, f64::max)
}

/// `sup_k |(1/n)(∫_0^k 1{B_s >= 0} ds - Σ_{i<=k} 1{S_i >= threshold})|`,
/// the integral taken as a left-endpoint sum on the unit grid.
pub fn lemma5_upper_on(sample: &CoupledSample, threshold: f64) -> f64 {
    sup_occupation_gap(sample, |b, s| (b >= 0.0) as i64 - (s as f64 >= threshold) as i64)
}

/// `sup_k |(1/n)(∫_0^k 1{B_s < 0} ds - Σ_{i<=k} 1{S_i < threshold})|`.
pub fn lemma5_lower_on(sample: &CoupledSample, threshold: f64) -> f64 {
    sup_occupation_gap(sample, |b, s| (b < 0.0) as i64 - ((s as f64) < threshold) as i64)
}

fn sup_occupation_gap<F: Fn(f64, i64) -> i64>(sample: &CoupledSample, term: F) -> f64 {
    let c = &sample.coupled;
    let n = c.len();
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0i64;
    let mut sup = 0i64;
    for i in 1..=n {
        acc += term(sample.brownian[i - 1], c.s.values[i]);
        sup = sup.max(acc.abs());
    }
    sup as f64 / n as f64
}

/// `(1/n) #{1 <= i <= n : Ŝ_i >= 0}`.
pub fn occupation_fraction(c: &CoupledWalk) -> f64 {
    let n = c.len();
    if n == 0 {
        return 0.0;
    }
    c.s_hat[1..].iter().filter(|&&v| v >= 0).count() as f64 / n as f64
}

/// `n^{1/3 + δ}`.
pub fn power_threshold(n: usize, delta: f64) -> f64 {
    (n as f64).powf(1.0 / 3.0 + delta)
}

pub fn lemma3_statistic(n: usize, seed: u64) -> f64 {
    lemma3_on(&coupled_sample(n, seed).coupled)
}

/// Upper display with threshold `n^{1/3} + δ`.
pub fn lemma4_statistic(n: usize, delta: f64, seed: u64) -> f64 {
    let threshold = (n as f64).cbrt() + delta;
    lemma4_upper_on(&coupled_sample(n, seed).coupled, threshold)
}

pub fn lemma5_statistic(n: usize, seed: u64) -> f64 {
    lemma5_on(&coupled_sample(n, seed), SIGMA)
}
