//! The effective one-dimensional walk `S_n = ξ_1 + … + ξ_n` with
//! `P[ξ = k] = (1/3) 2^{-|k|}`, its exit times from `[0, L-1]`, and the exact
//! exit-time law by dynamic programming.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::LatticeKind;
use crate::prudent::drive_excursions;
use crate::rng::CounterRng;
use crate::stats::{chi_square_sf, chi_square_sum, total_variation, Estimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EffectiveError {
    #[error("box size L must be at least 1, got {0}")]
    EmptyBox(i64),
    #[error("exit time exceeded the hard cap of {0} steps")]
    StepCapExceeded(u64),
    #[error("conditioning height must lie in 1..=8, got {0}")]
    HeightOutOfRange(i64),
    #[error("need at least {needed} conditioning events, got {got}")]
    InsufficientSamples { needed: u64, got: u64 },
    #[error("oracle scale exceeded: L = {l} (max {max_l}), n_max = {n_max} (max {max_n})")]
    ScaleExceeded { l: i64, max_l: i64, n_max: usize, max_n: usize },
}

pub const EXIT_STEP_CAP: u64 = 1_000_000_000;
pub const DP_MAX_L: i64 = 64;
pub const DP_MAX_STEPS: usize = 10_000;

/// The increment law `P[ξ = k] = (1/3) 2^{-|k|}` on the integers.
#[derive(Clone, Copy, Debug, Default)]
pub struct IncrementLaw;

impl IncrementLaw {
    pub const MEAN: f64 = 0.0;
    pub const VARIANCE: f64 = 4.0;

    pub fn pmf(k: i64) -> f64 {
        let m = k.unsigned_abs().min(2000) as i32;
        (0.5f64).powi(m) / 3.0
    }

    /// `P[ξ >= k]` for `k >= 1` (by symmetry also `P[ξ <= -k]`): `(2/3) 2^{-k}`.
    pub fn upper_tail(k: i64) -> f64 {
        debug_assert!(k >= 1);
        (0.5f64).powi(k.min(2000) as i32) * (2.0 / 3.0)
    }

    pub fn cdf(k: i64) -> f64 {
        if k < 0 {
            Self::upper_tail(-k)
        } else {
            1.0 - Self::upper_tail(k + 1)
        }
    }

    /// Inverse CDF. The three branches are the zero atom (`u` in `[1/3, 2/3)`)
    /// and the two signed Geometric(1/2) halves; powers of two are exact in
    /// binary floating point, so the interval tests are exact.
    pub fn quantile(u: f64) -> i64 {
        const THIRD: f64 = 1.0 / 3.0;
        if u < THIRD {
            // u in [(1/3) 2^{1-m} ... ) maps to -m, largest |k| nearest 0.
            -Self::geometric_index(3.0 * u, false)
        } else if u < 2.0 * THIRD {
            0
        } else {
            Self::geometric_index(3.0 * (1.0 - u), true)
        }
    }

    /// Smallest `m >= 1` with `w >= 2^{-m}` (`w > 2^{-m}` if `strict`), capped at 64.
    fn geometric_index(w: f64, strict: bool) -> i64 {
        let mut m = 1;
        let mut threshold = 0.5;
        while m < 64 && (w < threshold || (strict && w == threshold)) {
            m += 1;
            threshold *= 0.5;
        }
        m
    }

    #[inline]
    pub fn sample(rng: &mut CounterRng) -> i64 {
        Self::quantile(rng.uniform())
    }
}

pub fn pmf(k: i64) -> f64 {
    IncrementLaw::pmf(k)
}

pub fn sample_increment(rng: &mut CounterRng) -> i64 {
    IncrementLaw::sample(rng)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveTrajectory {
    pub seed: u64,
    /// `S_0 .. S_n`.
    pub values: Vec<i64>,
    /// `ξ_1 .. ξ_n`.
    pub increments: Vec<i64>,
}

impl EffectiveTrajectory {
    pub fn from_increments(seed: u64, increments: Vec<i64>) -> Self {
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut s = 0i64;
        values.push(0);
        for &x in &increments {
            s += x;
            values.push(s);
        }
        Self { seed, values, increments }
    }

    /// Trajectory with the given values (must start at 0).
    pub fn from_values(seed: u64, values: Vec<i64>) -> Self {
        assert_eq!(values.first(), Some(&0), "effective walk starts at 0");
        let increments = values.windows(2).map(|w| w[1] - w[0]).collect();
        Self { seed, values, increments }
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }
}

pub fn simulate_effective(n: usize, seed: u64) -> EffectiveTrajectory {
    simulate_effective_with(n, seed, &mut CounterRng::new(seed))
}

pub fn simulate_effective_with(n: usize, seed: u64, rng: &mut CounterRng) -> EffectiveTrajectory {
    let increments = (0..n).map(|_| IncrementLaw::sample(rng)).collect();
    EffectiveTrajectory::from_increments(seed, increments)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitSide {
    Below,
    Above,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitSample {
    pub l: i64,
    pub eta: u64,
    pub side: ExitSide,
    /// Distance beyond the boundary site: `-1 - S_eta` below, `S_eta - L` above.
    pub overshoot: i64,
}

/// Runs the walk from 0 until it leaves `[0, L-1]`.
pub fn exit_time(l: i64, rng: &mut CounterRng) -> Result<ExitSample, EffectiveError> {
    if l < 1 {
        return Err(EffectiveError::EmptyBox(l));
    }
    let mut s = 0i64;
    let mut eta = 0u64;
    loop {
        eta += 1;
        s += IncrementLaw::sample(rng);
        if s < 0 {
            return Ok(ExitSample {
                l,
                eta,
                side: ExitSide::Below,
                overshoot: -1 - s,
            });
        }
        if s > l - 1 {
            return Ok(ExitSample {
                l,
                eta,
                side: ExitSide::Above,
                overshoot: s - l,
            });
        }
        if eta >= EXIT_STEP_CAP {
            return Err(EffectiveError::StepCapExceeded(EXIT_STEP_CAP));
        }
    }
}

/// Exact law of `η_L` up to `n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitDistribution {
    pub l: i64,
    /// `pmf[m - 1] = P(η_L = m)` for `m = 1..=n_max`.
    pub pmf: Vec<f64>,
    /// `P(η_L = m, exit below)`, same indexing.
    pub pmf_below: Vec<f64>,
    /// `P(η_L > n_max)`.
    pub tail: f64,
}

impl ExitDistribution {
    pub fn n_max(&self) -> usize {
        self.pmf.len()
    }

    /// `P(η_L = m)`; zero for `m = 0`, `None` beyond `n_max`.
    pub fn prob(&self, m: usize) -> Option<f64> {
        match m {
            0 => Some(0.0),
            m if m <= self.pmf.len() => Some(self.pmf[m - 1]),
            _ => None,
        }
    }

    /// `P(η_L >= n)` for `1 <= n <= n_max + 1`.
    pub fn survival(&self, n: usize) -> Option<f64> {
        if n == 0 || n > self.pmf.len() + 1 {
            return None;
        }
        Some(self.pmf[n - 1..].iter().sum::<f64>() + self.tail)
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum::<f64>() + self.tail
    }
}

/// Exact exit-time law by propagating the sub-probability occupancy of
/// `[0, L-1]`. The mass leaving from site `x` in one step is the closed-form
/// tail `P[ξ <= -(x+1)] + P[ξ >= L-x]`, so nothing is truncated.
pub fn exit_time_dp(l: i64, n_max: usize) -> Result<ExitDistribution, EffectiveError> {
    if l < 1 {
        return Err(EffectiveError::EmptyBox(l));
    }
    if l > DP_MAX_L || n_max > DP_MAX_STEPS {
        return Err(EffectiveError::ScaleExceeded {
            l,
            max_l: DP_MAX_L,
            n_max,
            max_n: DP_MAX_STEPS,
        });
    }
    let size = l as usize;
    // kernel[x][y] = P[x + ξ = y] within the box.
    let kernel: Vec<Vec<f64>> = (0..size)
        .map(|x| (0..size).map(|y| IncrementLaw::pmf(y as i64 - x as i64)).collect())
        .collect();
    let leave_below: Vec<f64> = (0..size).map(|x| IncrementLaw::upper_tail(x as i64 + 1)).collect();
    let leave_above: Vec<f64> = (0..size)
        .map(|x| IncrementLaw::upper_tail(l - x as i64))
        .collect();

    let mut occ = vec![0.0; size];
    occ[0] = 1.0;
    let mut next = vec![0.0; size];
    let mut pmf = Vec::with_capacity(n_max);
    let mut pmf_below = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let below: f64 = occ.iter().zip(&leave_below).map(|(p, q)| p * q).sum();
        let above: f64 = occ.iter().zip(&leave_above).map(|(p, q)| p * q).sum();
        pmf.push(below + above);
        pmf_below.push(below);
        next.iter_mut().for_each(|v| *v = 0.0);
        for (x, &p) in occ.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (y, k) in kernel[x].iter().enumerate() {
                next[y] += p * k;
            }
        }
        std::mem::swap(&mut occ, &mut next);
    }
    let tail = occ.iter().sum();
    Ok(ExitDistribution {
        l,
        pmf,
        pmf_below,
        tail,
    })
}

/// Exit times of `n` independent walks; walk `i` uses stream `i` of `seed`.
pub fn exit_time_samples(l: i64, n: u64, seed: u64) -> Result<Vec<ExitSample>, EffectiveError> {
    (0..n)
        .into_par_iter()
        .map(|i| exit_time(l, &mut CounterRng::stream(seed, i)))
        .collect()
}

/// Histogram of observed exit times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalExitLaw {
    pub l: i64,
    pub n: u64,
    /// `counts[m - 1] = #{η = m}`.
    pub counts: Vec<u64>,
}

impl EmpiricalExitLaw {
    pub fn from_samples(l: i64, samples: &[ExitSample]) -> Self {
        let longest = samples.iter().map(|s| s.eta).max().unwrap_or(0) as usize;
        let mut counts = vec![0u64; longest];
        for s in samples {
            counts[s.eta as usize - 1] += 1;
        }
        Self {
            l,
            n: samples.len() as u64,
            counts,
        }
    }

    pub fn prob(&self, m: usize) -> f64 {
        if m == 0 || self.n == 0 {
            return 0.0;
        }
        self.counts.get(m - 1).copied().unwrap_or(0) as f64 / self.n as f64
    }

    /// Fraction of samples with `η >= m`.
    pub fn survival(&self, m: usize) -> f64 {
        self.survival_count(m) as f64 / self.n as f64
    }

    fn survival_count(&self, m: usize) -> u64 {
        let from = m.saturating_sub(1).min(self.counts.len());
        self.counts[from..].iter().sum()
    }

    /// `P(η >= m)` as a binomial estimate.
    pub fn survival_estimate(&self, m: usize, seed: u64) -> Estimate {
        Estimate::proportion(self.survival_count(m), self.n, seed)
            .with_meta("L", self.l)
            .with_meta("n", m)
    }

    /// Total variation against the exact law, with `P(η > n_max)` as one cell.
    pub fn tv_distance(&self, exact: &ExitDistribution) -> f64 {
        let n_max = exact.n_max();
        let mut empirical: Vec<f64> = (1..=n_max).map(|m| self.prob(m)).collect();
        empirical.push(self.survival(n_max + 1));
        let mut oracle = exact.pmf.clone();
        oracle.push(exact.tail);
        total_variation(&empirical, &oracle)
    }
}

/// Monte Carlo estimate of `P(η_L >= n)`.
pub fn gamblers_ruin_estimate(l: i64, n: usize, samples: u64, seed: u64) -> Result<Estimate, EffectiveError> {
    let draws = exit_time_samples(l, samples, seed)?;
    Ok(EmpiricalExitLaw::from_samples(l, &draws).survival_estimate(n, seed))
}

/// Fewest conditioning events accepted by [`lemma1_check`].
pub const LEMMA1_MIN_EVENTS: u64 = 100;

/// Exit-law horizon used as the chi-square reference.
const LEMMA1_DP_STEPS: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightTest {
    pub height: i64,
    pub events: u64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// `(m, observed, expected)` per merged cell, `m` being the cell's first exit time.
    pub cells: Vec<(u64, u64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub kind: LatticeKind,
    pub n_walks: u64,
    pub n_steps: u64,
    pub seed: u64,
    pub trapped: u64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub tests: Vec<HeightTest>,
    /// Heights with fewer than [`LEMMA1_MIN_EVENTS`] events.
    pub skipped: Vec<(i64, u64)>,
}

/// Width increments `X_k` (`k >= 1`, complete excursions) keyed by `H_{T_k}`,
/// from `n_walks` walks of `n_steps` steps.
pub fn width_increments_by_height(
    kind: LatticeKind,
    n_steps: u64,
    n_walks: u64,
    seed: u64,
) -> (Vec<(i64, i64)>, u64) {
    let runs: Vec<(Vec<(i64, i64)>, bool)> = (0..n_walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::stream(seed, i);
            let run = drive_excursions(kind, n_steps, &mut rng, |_| false);
            let pairs = run
                .completed
                .iter()
                .filter(|r| r.k >= 1)
                .map(|r| (r.t_start.height(), r.x))
                .collect();
            (pairs, run.trapped)
        })
        .collect();
    let trapped = runs.iter().filter(|r| r.1).count() as u64;
    (runs.into_iter().flat_map(|r| r.0).collect(), trapped)
}

/// Chi-square comparison of the law of `X_k` given `H_{T_k} = h` with the
/// exact law of `η_h`, pooled over `heights` (statistics and degrees of
/// freedom add).
pub fn lemma1_pooled(
    kind: LatticeKind,
    heights: &[i64],
    n_steps: u64,
    n_walks: u64,
    seed: u64,
) -> Result<Lemma1Report, EffectiveError> {
    for &h in heights {
        if !(1..=8).contains(&h) {
            return Err(EffectiveError::HeightOutOfRange(h));
        }
    }
    let (pairs, trapped) = width_increments_by_height(kind, n_steps, n_walks, seed);
    let mut tests = Vec::new();
    let mut skipped = Vec::new();
    for &h in heights {
        let xs: Vec<i64> = pairs.iter().filter(|p| p.0 == h).map(|p| p.1).collect();
        if (xs.len() as u64) < LEMMA1_MIN_EVENTS {
            skipped.push((h, xs.len() as u64));
            continue;
        }
        tests.push(height_test(h, &xs)?);
    }
    if tests.is_empty() {
        let got = skipped.iter().map(|s| s.1).max().unwrap_or(0);
        return Err(EffectiveError::InsufficientSamples {
            needed: LEMMA1_MIN_EVENTS,
            got,
        });
    }
    let statistic = tests.iter().map(|t| t.statistic).sum();
    let dof = tests.iter().map(|t| t.dof).sum();
    Ok(Lemma1Report {
        kind,
        n_walks,
        n_steps,
        seed,
        trapped,
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        tests,
        skipped,
    })
}

/// Single-height version of [`lemma1_pooled`].
pub fn lemma1_check(
    kind: LatticeKind,
    height: i64,
    n_steps: u64,
    n_walks: u64,
    seed: u64,
) -> Result<Lemma1Report, EffectiveError> {
    lemma1_pooled(kind, &[height], n_steps, n_walks, seed)
}

fn height_test(h: i64, xs: &[i64]) -> Result<HeightTest, EffectiveError> {
    let exact = exit_time_dp(h, LEMMA1_DP_STEPS)?;
    // Cells m = 1..=n_max and the tail m > n_max. X_k >= 1 for k >= 1.
    let mut counts = vec![0u64; LEMMA1_DP_STEPS + 1];
    for &x in xs {
        let m = (x.max(1) as usize).min(LEMMA1_DP_STEPS + 1);
        counts[m - 1] += 1;
    }
    let mut probs = exact.pmf.clone();
    probs.push(exact.tail);
    let n = xs.len() as u64;
    let min_prob = 5.0 / n as f64;
    let mut cells: Vec<(u64, u64, f64)> = Vec::new();
    let mut acc = (0u64, 0.0f64);
    let mut first = 1u64;
    for (i, (&c, &p)) in counts.iter().zip(&probs).enumerate() {
        acc = (acc.0 + c, acc.1 + p);
        if acc.1 >= min_prob {
            cells.push((first, acc.0, acc.1));
            acc = (0, 0.0);
            first = i as u64 + 2;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.1 += acc.0;
        last.2 += acc.1;
    }
    let merged: Vec<(u64, f64)> = cells.iter().map(|&(_, c, p)| (c, p)).collect();
    let statistic = chi_square_sum(&merged, n);
    let dof = merged.len().saturating_sub(1).max(1);
    Ok(HeightTest {
        height: h,
        events: n,
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        cells: cells.into_iter().map(|(m, c, p)| (m, c, p * n as f64)).collect(),
    })
}
