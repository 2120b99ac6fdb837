use std::fs;

use pwl_core::experiments::{run_and_write, run_experiment, ExperimentConfig, Report, EXPERIMENTS};
use pwl_core::lattice::LatticeKind;

fn small(name: &str) -> ExperimentConfig {
    let base = ExperimentConfig::defaults_for(name).unwrap();
    let k_range = match name {
        "lemma1" => vec![2, 3],
        "proposition-ak" => vec![2, 4, 8],
        "lemma1.5" => vec![5],
        "lemma2" => vec![2, 8],
        "theorem-q1" => vec![200, 2000],
        "lemma3" | "lemma4" | "lemma5-occupation" => vec![100, 1000],
        _ => base.k_range.clone(),
    };
    ExperimentConfig {
        n_steps: base.n_steps.min(2000),
        n_samples: if name == "lemma1" { 2000 } else { 40 },
        k_range,
        grid_step: 1e-2,
        ..base
    }
}

#[test]
fn every_experiment_runs_and_writes() {
    let dir = tempfile::tempdir().unwrap();
    for name in EXPERIMENTS {
        let c = ExperimentConfig {
            output_dir: dir.path().join(name),
            ..small(name)
        };
        let (out, files) = run_and_write(name, &c).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!out.report.checks.is_empty(), "{name} has no checks");
        let json = dir.path().join(name).join(format!("{name}.json"));
        assert!(files.contains(&json));
        let back: Report = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!(back.experiment, name);
        assert_eq!(back.config, c);
        assert_eq!(back.passed, out.report.checks.iter().all(|c| c.passed()));
        let csv = fs::read_to_string(dir.path().join(name).join(format!("{name}.csv"))).unwrap();
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
        let width = csv.lines().next().unwrap().split(',').count();
        assert!(csv.lines().all(|l| l.split(',').count() == width), "{name}: ragged csv");
    }
}

#[test]
fn reruns_are_identical_across_thread_counts() {
    let c = small("coupling");
    let a = run_experiment("coupling", &c).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| run_experiment("coupling", &c).unwrap());
    assert_eq!(a.report, b.report);
    assert_eq!(a.tables[0].1.to_csv().unwrap(), b.tables[0].1.to_csv().unwrap());
}

#[test]
fn square_alpha_small_run_is_near_seven_thirds() {
    let c = ExperimentConfig {
        lattice: LatticeKind::Square,
        n_steps: 20_000,
        n_samples: 40,
        ..ExperimentConfig::defaults_for("lemma7-alpha").unwrap()
    };
    let out = run_experiment("lemma7-alpha", &c).unwrap();
    let alpha = out.report.metrics["alpha"].as_f64().unwrap();
    assert!((alpha - 7.0 / 3.0).abs() < 0.1, "alpha {alpha}");
}
