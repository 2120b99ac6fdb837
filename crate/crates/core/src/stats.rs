//! Monte Carlo estimators, goodness-of-fit statistics and regression helpers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::lattice::PlanePoint;
use crate::rng::CounterRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("sample is empty")]
    EmptySample,
}

/// A point estimate with its standard error and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub meta: BTreeMap<String, String>,
}

impl Estimate {
    /// Binomial proportion `successes / n` with stderr `sqrt(p(1-p)/n)`.
    pub fn proportion(successes: u64, n: u64, seed: u64) -> Self {
        let (value, stderr) = if n == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let p = successes as f64 / n as f64;
            (p, (p * (1.0 - p) / n as f64).sqrt())
        };
        Self {
            value,
            stderr,
            n_samples: n,
            seed,
            meta: BTreeMap::new(),
        }
    }

    /// Sample mean with stderr `s / sqrt(n)`.
    pub fn mean_of(values: &[f64], seed: u64) -> Self {
        let n = values.len();
        let m = mean(values);
        let se = if n > 1 { (sample_variance(values) / n as f64).sqrt() } else { f64::NAN };
        Self {
            value: m,
            stderr: se,
            n_samples: n as u64,
            seed,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    /// `value ± z * stderr`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.value - z * self.stderr, self.value + z * self.stderr)
    }
}

/// Estimates `P(event)` from `n` independent draws; draw `i` uses stream `i` of `seed`.
pub fn estimate_event_probability<F>(event: F, n: u64, seed: u64) -> Estimate
where
    F: Fn(&mut CounterRng) -> bool + Sync,
{
    let hits: u64 = (0..n)
        .into_par_iter()
        .map(|i| event(&mut CounterRng::stream(seed, i)) as u64)
        .sum();
    Estimate::proportion(hits, n, seed)
}

/// Sum in a fixed binary tree order, independent of thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated empirical quantile (type 7).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Standard error of the mean of `values` by `n_boot` bootstrap resamples.
pub fn bootstrap_stderr(values: &[f64], n_boot: usize, seed: u64) -> f64 {
    let n = values.len();
    if n < 2 || n_boot < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = CounterRng::stream(seed, b);
            let draw: Vec<f64> = (0..n).map(|_| values[rng.below(n as u32) as usize]).collect();
            mean(&draw)
        })
        .collect();
    sample_variance(&means).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, StatsError> {
    assert_eq!(xs.len(), ys.len(), "paired samples");
    if xs.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: xs.len() });
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let syy: Vec<f64> = ys.iter().map(|y| (y - my) * (y - my)).collect();
    let (sxx, sxy, syy) = (pairwise_sum(&sxx), pairwise_sum(&sxy), pairwise_sum(&syy));
    if sxx == 0.0 {
        return Err(StatsError::InsufficientData { needed: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Log-log power-law fit of estimated probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub k_values: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// `k` values whose estimate was zero and left out of the fit.
    pub dropped: Vec<f64>,
}

pub fn fit_tail_exponent(k_values: &[f64], estimates: &[Estimate]) -> Result<TailFit, StatsError> {
    assert_eq!(k_values.len(), estimates.len(), "one estimate per k");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = Vec::new();
    for (&k, e) in k_values.iter().zip(estimates) {
        if e.value > 0.0 && k > 0.0 {
            xs.push(k.ln());
            ys.push(e.value.ln());
        } else {
            dropped.push(k);
        }
    }
    if xs.len() < 3 {
        return Err(StatsError::InsufficientData { needed: 3, got: xs.len() });
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(TailFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        k_values: k_values.to_vec(),
        estimates: estimates.to_vec(),
        dropped,
    })
}

/// One-sample Kolmogorov-Smirnov statistic `sup |F_n - F|`.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let x = v[i];
        let mut j = i;
        while j < v.len() && v[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    Ok(d)
}

/// Total variation distance `(1/2) Σ |p_i - q_i|` over aligned cells.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let diffs: Vec<f64> = (0..n)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .collect();
    0.5 * pairwise_sum(&diffs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub n: u64,
    pub bins: usize,
}

/// Pearson goodness of fit for `counts` against cell probabilities `probs`
/// (which must cover the whole law). Adjacent cells are merged from the right
/// until every merged cell expects at least `min_expected` observations.
pub fn chi_square_gof(counts: &[u64], probs: &[f64], min_expected: f64) -> Result<ChiSquareResult, StatsError> {
    assert_eq!(counts.len(), probs.len(), "one probability per cell");
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    let cells = merge_cells(counts, probs, min_expected / n as f64);
    if cells.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: cells.len() });
    }
    let statistic = chi_square_sum(&cells, n);
    let dof = cells.len() - 1;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        n,
        bins: cells.len(),
    })
}

/// Merged `(count, probability)` cells, each with probability at least `min_prob`.
pub fn merge_cells(counts: &[u64], probs: &[f64], min_prob: f64) -> Vec<(u64, f64)> {
    let mut cells: Vec<(u64, f64)> = Vec::new();
    let mut acc = (0u64, 0.0f64);
    for (&c, &p) in counts.iter().zip(probs) {
        acc.0 += c;
        acc.1 += p;
        if acc.1 >= min_prob {
            cells.push(acc);
            acc = (0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    cells
}

pub fn chi_square_sum(cells: &[(u64, f64)], n: u64) -> f64 {
    let terms: Vec<f64> = cells
        .iter()
        .map(|&(c, p)| {
            let e = p * n as f64;
            (c as f64 - e) * (c as f64 - e) / e
        })
        .collect();
    pairwise_sum(&terms)
}

/// Upper tail of the chi-square law.
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

fn mean_pair_distance(a: &[PlanePoint], b: &[PlanePoint]) -> f64 {
    let rows: Vec<f64> = a
        .iter()
        .map(|&p| pairwise_sum(&b.iter().map(|&q| p.dist(q)).collect::<Vec<_>>()))
        .collect();
    pairwise_sum(&rows) / (a.len() as f64 * b.len() as f64)
}

/// Above this many points per sample the energy distance is computed on a
/// seeded subsample.
pub const ENERGY_SUBSAMPLE: usize = 2000;

/// Energy distance `2E|a-b| - E|a-a'| - E|b-b'|` (V-statistic over all pairs).
pub fn energy_distance_2d(a: &[PlanePoint], b: &[PlanePoint]) -> Result<f64, StatsError> {
    energy_distance_2d_seeded(a, b, 0)
}

pub fn energy_distance_2d_seeded(a: &[PlanePoint], b: &[PlanePoint], seed: u64) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let a = subsample(a, ENERGY_SUBSAMPLE, seed, 0);
    let b = subsample(b, ENERGY_SUBSAMPLE, seed, 1);
    let ab = mean_pair_distance(&a, &b);
    let aa = mean_pair_distance(&a, &a);
    let bb = mean_pair_distance(&b, &b);
    Ok(2.0 * ab - aa - bb)
}

fn subsample(xs: &[PlanePoint], cap: usize, seed: u64, stream: u64) -> Vec<PlanePoint> {
    if xs.len() <= cap {
        return xs.to_vec();
    }
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    shuffle(&mut idx, &mut CounterRng::stream(seed, stream));
    idx.truncate(cap);
    idx.sort_unstable();
    idx.into_iter().map(|i| xs[i]).collect()
}

fn shuffle<T>(xs: &mut [T], rng: &mut CounterRng) {
    use rand::seq::SliceRandom;
    xs.shuffle(rng);
}

/// Energy distances of `n_perm` random relabellings of the pooled sample.
pub fn energy_permutation_null(
    a: &[PlanePoint],
    b: &[PlanePoint],
    n_perm: usize,
    seed: u64,
) -> Result<Vec<f64>, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let a = subsample(a, ENERGY_SUBSAMPLE, seed, 0);
    let b = subsample(b, ENERGY_SUBSAMPLE, seed, 1);
    let pooled: Vec<PlanePoint> = a.iter().chain(&b).copied().collect();
    let n = pooled.len();
    // All pairwise distances once; each permutation only re-partitions them.
    let dist: Vec<f64> = (0..n * n).map(|ij| pooled[ij / n].dist(pooled[ij % n])).collect();
    let na = a.len();
    (0..n_perm as u64)
        .into_par_iter()
        .map(|p| {
            let mut idx: Vec<usize> = (0..n).collect();
            shuffle(&mut idx, &mut CounterRng::stream(seed, 2 + p));
            let (ia, ib) = idx.split_at(na);
            let block = |x: &[usize], y: &[usize]| {
                let rows: Vec<f64> = x
                    .iter()
                    .map(|&i| pairwise_sum(&y.iter().map(|&j| dist[i * n + j]).collect::<Vec<_>>()))
                    .collect();
                pairwise_sum(&rows) / (x.len() as f64 * y.len() as f64)
            };
            Ok(2.0 * block(ia, ib) - block(ia, ia) - block(ib, ib))
        })
        .collect()
}
