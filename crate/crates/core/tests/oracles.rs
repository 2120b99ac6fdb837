//! Monte Carlo checks against independent oracles.

use rayon::prelude::*;

use pwl_core::effective::{exit_time_dp, exit_time_samples, gamblers_ruin_estimate, IncrementLaw, EmpiricalExitLaw};
use pwl_core::lattice::{directions, LatticeKind, PlanePoint};
use pwl_core::limit::{
    arcsine_cdf, coupled_sample, lemma4_statistic, lemma5_on, lemma5_statistic, occupation_integrals, sample_brownian,
};
use pwl_core::prudent::{quadrant_event, simulate, PrudentPath};
use pwl_core::rng::{stream_key, CounterRng};
use pwl_core::stats::{
    energy_distance_2d, energy_permutation_null, fit_tail_exponent, ks_distance, mean, median, quantile,
    sample_variance, Estimate,
};

#[test]
fn first_step_is_uniform() {
    const N: u64 = 100_000;
    for kind in [LatticeKind::Square, LatticeKind::Triangular] {
        let dirs = directions(kind);
        let d = dirs.len() as f64;
        let firsts: Vec<usize> = (0..N)
            .into_par_iter()
            .map(|seed| {
                let mut p = PrudentPath::new(kind, seed);
                let step = p.step().unwrap();
                dirs.iter().position(|x| *x == step).unwrap()
            })
            .collect();
        let band = 3.0 * ((1.0 / d) * (1.0 - 1.0 / d) / N as f64).sqrt();
        for j in 0..dirs.len() {
            let f = firsts.iter().filter(|&&x| x == j).count() as f64 / N as f64;
            assert!((f - 1.0 / d).abs() <= band, "{kind} direction {j}: {f}");
        }
    }
}

#[test]
fn square_walks_do_not_trap() {
    let trapped = (0..100u64)
        .into_par_iter()
        .filter(|&s| simulate(LatticeKind::Square, 10_000, s).trapped())
        .count();
    assert_eq!(trapped, 0);
}

#[test]
fn square_quadrant_probability_is_a_quarter() {
    const N: u64 = 100_000;
    let hits = (0..N)
        .into_par_iter()
        .filter(|&s| quadrant_event(&simulate(LatticeKind::Square, 1000, stream_key(7, s))))
        .count() as f64;
    let p = hits / N as f64;
    assert!((p - 0.25).abs() <= 0.01, "P(Q1) = {p}");
}

#[test]
fn increment_moments() {
    const N: u64 = 1_000_000;
    let mut rng = CounterRng::new(11);
    let xs: Vec<f64> = (0..N).map(|_| IncrementLaw::sample(&mut rng) as f64).collect();
    let m = mean(&xs);
    let v = sample_variance(&xs);
    assert!(m.abs() <= 3.0 * 2.0 / (N as f64).sqrt(), "mean {m}");
    assert!((v - 4.0).abs() <= 0.08, "variance {v}");
    let second: f64 = (-64i64..=64).map(|k| (k * k) as f64 * IncrementLaw::pmf(k)).sum();
    assert!((second - 4.0).abs() < 1e-12);
}

#[test]
fn exit_law_small_boxes() {
    let samples = exit_time_samples(2, 100_000, 5).unwrap();
    let p1 = samples.iter().filter(|s| s.eta == 1).count() as f64 / samples.len() as f64;
    assert!((p1 - 0.5).abs() <= 0.005, "P(eta_2 = 1) = {p1}");
    let law = EmpiricalExitLaw::from_samples(5, &exit_time_samples(5, 100_000, 6).unwrap());
    assert!(law.tv_distance(&exit_time_dp(5, 10_000).unwrap()) < 0.01);
    let e = gamblers_ruin_estimate(1, 3, 100_000, 8).unwrap();
    assert!((e.value - 1.0 / 9.0).abs() <= 4.0 * e.stderr, "{e:?}");
}

#[test]
fn brownian_positive_time_is_arcsine() {
    const N: u64 = 10_000;
    let fractions: Vec<f64> = (0..N)
        .into_par_iter()
        .map(|i| {
            let w = sample_brownian(1.0, 1e-4, stream_key(3, i)).unwrap();
            occupation_integrals(&w, 1.0).unwrap().above
        })
        .collect();
    let ks = ks_distance(&fractions, |x| arcsine_cdf(x.clamp(0.0, 1.0)).unwrap()).unwrap();
    assert!(ks < 0.02, "KS = {ks}");
}

#[test]
fn ks_of_a_sample_from_its_own_law() {
    let mut rng = CounterRng::new(21);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
    assert!(ks_distance(&xs, |x| x.clamp(0.0, 1.0)).unwrap() < 0.02);
}

#[test]
fn energy_of_identical_laws_is_small() {
    let draw = |seed: u64| -> Vec<PlanePoint> {
        let mut rng = CounterRng::new(seed);
        (0..1000).map(|_| PlanePoint::new(rng.uniform(), rng.uniform())).collect()
    };
    let (a, b) = (draw(1), draw(2));
    let e = energy_distance_2d(&a, &b).unwrap();
    // Scale: mean distance between two uniform points of the unit square.
    assert!(e < 0.05 * 0.5214, "energy {e}");
    let null = energy_permutation_null(&a, &b, 100, 9).unwrap();
    assert!(e <= quantile(&null, 0.999));
}

#[test]
fn tail_fit_on_perturbed_power_law() {
    let ks = [4.0, 8.0, 16.0, 32.0, 64.0];
    let mut rng = CounterRng::new(4);
    let est: Vec<Estimate> = ks
        .iter()
        .map(|&k: &f64| {
            let p = 0.3 * k.powf(-1.5) * (1.0 + 0.01 * (2.0 * rng.uniform() - 1.0));
            Estimate::proportion((p * 1e9) as u64, 1_000_000_000, 0)
        })
        .collect();
    let fit = fit_tail_exponent(&ks, &est).unwrap();
    assert!((fit.slope + 1.5).abs() <= 0.05, "slope {}", fit.slope);
}

#[test]
fn occupation_gap_medians_shrink() {
    let med = |n: usize| -> f64 {
        let v: Vec<f64> = (0..200u64).into_par_iter().map(|i| lemma4_statistic(n, 0.1, stream_key(n as u64, i))).collect();
        median(&v)
    };
    let (a, b, c) = (med(1000), med(10_000), med(100_000));
    assert!(a >= b && b >= c && c < a, "{a} {b} {c}");
}

#[test]
fn brownian_gap_over_n_shrinks() {
    let med = |n: usize| -> f64 {
        let v: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|i| lemma5_statistic(n, stream_key(n as u64, i)) / n as f64)
            .collect();
        median(&v)
    };
    let (a, b, c) = (med(1000), med(10_000), med(100_000));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn wrong_sigma_is_worse() {
    let stat = |sigma: f64| -> f64 {
        let v: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|i| lemma5_on(&coupled_sample(10_000, stream_key(17, i)), sigma))
            .collect();
        median(&v)
    };
    assert!(stat(1.0) > stat(2.0));
}
