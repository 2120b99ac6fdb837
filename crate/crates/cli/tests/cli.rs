use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pwl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwl"))
        .args(args)
        .env("PWL_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn simulate_prints_summary_and_dumps_sites() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("walk.ndjson");
    let o = pwl(&["simulate", "--lattice", "square", "--steps", "50", "--seed", "3", "--dump-path", dump.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["steps"], 50);
    assert_eq!(summary["lattice"], "square");
    let lines: Vec<serde_json::Value> = fs::read_to_string(&dump)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 51);
    assert_eq!(lines[0]["t"], 0);
    assert_eq!((lines[0]["a"].clone(), lines[0]["b"].clone()), (0.into(), 0.into()));
    assert_eq!(lines[50]["a"], summary["end"]["a"]);
    let again = pwl(&["simulate", "--lattice", "square", "--steps", "50", "--seed", "3"]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn exit_times_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exit.csv");
    let o = pwl(&["exit-times", "--L", "1", "--samples", "20000", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("L,m,p_exact,p_empirical,stderr"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0..2], ["1", "1"]);
    let p: f64 = first[2].parse().unwrap();
    assert!((p - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(code(&pwl(&["simulate"])), 2);
    assert_eq!(code(&pwl(&["experiment", "no-such-thing"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"n_samples": 0, "k_range": [1000, 10000]}"#).unwrap();
    let o = pwl(&["experiment", "lemma3", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_samples"));
    fs::write(&cfg, r#"{"unknown_field": 1}"#).unwrap();
    assert_eq!(code(&pwl(&["experiment", "lemma3", "--config", cfg.to_str().unwrap()])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_pwl"))
        .args(["list"])
        .env("PWL_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

fn run_experiment(dir: &Path, name: &str, config: &str) -> Output {
    let cfg = dir.join(format!("{name}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    pwl(&["experiment", name, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

#[test]
fn experiment_exit_codes_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run_experiment(dir.path(), "coupling", r#"{"n_steps": 500, "n_samples": 20}"#);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));
    let out = dir.path().join("out");
    for f in ["coupling.json", "coupling.csv", "coupling-ledger.ndjson"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report = pwl(&["report", "--dir", out.to_str().unwrap()]);
    assert_eq!(code(&report), 0);
    assert!(String::from_utf8_lossy(&report.stdout).starts_with("PASS coupling"));

    // The exit law cannot clear its bars at this sample size.
    let bad = run_experiment(dir.path(), "lemma1.5", r#"{"n_samples": 200, "k_range": [10]}"#);
    assert_eq!(code(&bad), 1);
    let report = pwl(&["report", "--dir", out.to_str().unwrap()]);
    assert_eq!(code(&report), 1);
}

#[test]
fn config_prints_defaults() {
    let o = pwl(&["config", "lemma1"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["lattice"], "square");
    assert_eq!(v["k_range"], serde_json::json!([1, 2, 3, 4, 5]));
}
