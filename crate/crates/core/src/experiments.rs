//! Named experiments: configuration, execution and report files.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]. Replicate
//! `i` of a batch draws from its own counter-based stream, results are
//! collected in replicate order and reduced sequentially, so reruns produce
//! byte-identical files regardless of the thread count.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::coupling::{
    build_coupled_walk, corner_trace, coupling_equality_check, running_sup_distance, sup_distance, TruncationCap,
};
use crate::effective::{
    exit_time_dp, exit_time_samples, lemma1_pooled, EffectiveError, EmpiricalExitLaw, DP_MAX_L, DP_MAX_STEPS,
};
use crate::lattice::{embed, LatticeKind, PlanePoint};
use crate::limit::{
    arcsine_cdf, coupled_sample, estimate_alpha, gamma_path, lemma3_on, lemma4_lower_on, lemma4_upper_on,
    lemma5_lower_on, lemma5_on, lemma5_upper_on, occupation_fraction, power_threshold, sample_brownian,
    simulate_time_change, z_functional, AlphaEstimate, StepVectors, SIGMA,
};
use crate::output::{ensure_dir, write_csv, write_json, write_ndjson, Table};
use crate::prudent::{crossing_event_record, drive_excursions, quadrant_event, simulate, ExcursionRecord};
use crate::rng::{stream_key, CounterRng};
use crate::row;
use crate::stats::{
    energy_distance_2d_seeded, energy_permutation_null, fit_tail_exponent, ks_distance, linear_fit, mean, median,
    quantile, Estimate, StatsError,
};

pub const EXPERIMENTS: [&str; 12] = [
    "lemma1",
    "proposition-ak",
    "lemma1.5",
    "lemma2",
    "coupling",
    "theorem-q1",
    "theorem2",
    "lemma3",
    "lemma4",
    "lemma5-occupation",
    "lemma6",
    "lemma7-alpha",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment `{0}` (expected one of: {list})", list = EXPERIMENTS.join(", "))]
    UnknownExperiment(String),
    #[error("invalid config: {}", format_issues(.0))]
    ConfigInvalid(Vec<ConfigIssue>),
    #[error(transparent)]
    Effective(#[from] EffectiveError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Limit(#[from] crate::limit::LimitError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub field: String,
    pub reason: String,
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("{}: {}", i.field, i.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parameters shared by all experiments. Each experiment documents which
/// fields it reads; `k_range` holds the swept values (k, L, heights, n or t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeKind,
    pub n_steps: u64,
    pub n_samples: u64,
    pub seed: u64,
    pub k_range: Vec<u64>,
    pub delta: f64,
    pub epsilon: f64,
    pub grid_step: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeKind::Triangular,
            n_steps: 1000,
            n_samples: 1000,
            seed: 42,
            k_range: Vec::new(),
            delta: 0.1,
            epsilon: 0.1,
            grid_step: 1e-4,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Full-scale configuration used by the acceptance suite.
    pub fn defaults_for(name: &str) -> Result<Self, ExperimentError> {
        let base = Self::default();
        let c = match name {
            "lemma1" => Self {
                lattice: LatticeKind::Square,
                n_steps: 1000,
                n_samples: 100_000,
                k_range: vec![1, 2, 3, 4, 5],
                ..base
            },
            "proposition-ak" => Self {
                n_steps: 10_000_000,
                n_samples: 100_000,
                k_range: vec![4, 8, 16, 32, 64],
                ..base
            },
            "lemma1.5" => Self {
                n_samples: 100_000,
                k_range: vec![10, 20],
                ..base
            },
            "lemma2" => Self {
                n_steps: 10_000_000,
                n_samples: 100_000,
                k_range: vec![8, 32],
                ..base
            },
            "coupling" => Self {
                n_steps: 10_000,
                n_samples: 1000,
                ..base
            },
            "theorem-q1" => Self {
                n_samples: 200,
                k_range: vec![10_000, 100_000],
                ..base
            },
            "theorem2" => Self {
                n_steps: 100_000,
                n_samples: 500,
                ..base
            },
            "lemma3" | "lemma4" => Self {
                n_samples: 500,
                k_range: vec![1000, 10_000, 100_000],
                ..base
            },
            "lemma5-occupation" => Self {
                n_steps: 10_000,
                n_samples: 500,
                k_range: vec![1000, 10_000, 100_000],
                ..base
            },
            "lemma6" => Self {
                n_steps: 10_000,
                n_samples: 500,
                ..base
            },
            "lemma7-alpha" => Self {
                lattice: LatticeKind::Square,
                n_steps: 100_000,
                n_samples: 200,
                ..base
            },
            other => return Err(ExperimentError::UnknownExperiment(other.to_string())),
        };
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Field checks common to all experiments.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let mut issues = Vec::new();
        let mut bad = |field: &str, reason: &str| {
            issues.push(ConfigIssue {
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.n_steps == 0 {
            bad("n_steps", "must be positive");
        }
        if self.n_samples == 0 {
            bad("n_samples", "must be positive");
        }
        if self.k_range.contains(&0) {
            bad("k_range", "entries must be positive");
        }
        for (field, v) in [("delta", self.delta), ("epsilon", self.epsilon), ("grid_step", self.grid_step)] {
            if !(v.is_finite() && v > 0.0) {
                bad(field, "must be a positive finite number");
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::ConfigInvalid(issues))
        }
    }

    fn validate_for(&self, name: &str) -> Result<(), ExperimentError> {
        self.validate()?;
        let issue = |reason: &str| {
            Err(ExperimentError::ConfigInvalid(vec![ConfigIssue {
                field: "k_range".to_string(),
                reason: reason.to_string(),
            }]))
        };
        let needs_range = !matches!(name, "coupling" | "theorem2" | "lemma6" | "lemma7-alpha");
        if needs_range && self.k_range.is_empty() {
            return issue("must not be empty for this experiment");
        }
        match name {
            "lemma1" if self.k_range.iter().any(|&h| h > 8) => issue("heights must lie in 1..=8"),
            "lemma1.5" if self.k_range.iter().any(|&l| l as i64 > DP_MAX_L) => issue("box sizes must lie in 1..=64"),
            "proposition-ak" if self.k_range.len() < 3 => issue("need at least three k values"),
            "lemma2" if self.k_range.len() < 2 => issue("need at least two k values"),
            "theorem-q1" | "lemma3" | "lemma4" | "lemma5-occupation" if self.k_range.len() < 2 => {
                issue("need at least two values")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// A failure that a disclosed dependency turns into a warning.
    Warn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub bar: String,
    pub observed: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, bar: impl Into<String>, observed: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            status: if passed { Status::Pass } else { Status::Fail },
            bar: bar.into(),
            observed: observed.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, Value>,
    pub notes: Vec<String>,
}

impl Report {
    fn new(name: &str, config: &ExperimentConfig) -> Self {
        Self {
            experiment: name.to_string(),
            config: config.clone(),
            passed: true,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, check: Check) {
        self.checks.push(check);
        self.passed = self.checks.iter().all(Check::passed);
    }

    fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

/// A report together with its tables; table `""` is written as `<name>.csv`,
/// others as `<name>-<suffix>.csv`.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub tables: Vec<(String, Table)>,
    pub ndjson: Vec<(String, Vec<Value>)>,
}

impl RunOutput {
    fn new(report: Report) -> Self {
        Self {
            report,
            tables: Vec::new(),
            ndjson: Vec::new(),
        }
    }

    fn table(&mut self, suffix: &str, table: Table) {
        self.tables.push((suffix.to_string(), table));
    }

    /// Writes the report and tables into `dir` and returns the paths written.
    pub fn write(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        ensure_dir(dir)?;
        let name = &self.report.experiment;
        let file = |suffix: &str, ext: &str| {
            if suffix.is_empty() {
                dir.join(format!("{name}.{ext}"))
            } else {
                dir.join(format!("{name}-{suffix}.{ext}"))
            }
        };
        let mut written = Vec::new();
        for (suffix, table) in &self.tables {
            let path = file(suffix, "csv");
            write_csv(&path, table)?;
            written.push(path);
        }
        for (suffix, docs) in &self.ndjson {
            let path = file(suffix, "ndjson");
            write_ndjson(&path, docs)?;
            written.push(path);
        }
        let path = file("", "json");
        write_json(&path, &self.report)?;
        written.push(path);
        Ok(written)
    }
}

/// Runs experiment `name` and returns its report and tables without writing.
pub fn run_experiment(name: &str, config: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    if !EXPERIMENTS.contains(&name) {
        return Err(ExperimentError::UnknownExperiment(name.to_string()));
    }
    config.validate_for(name)?;
    match name {
        "lemma1" => lemma1(config),
        "proposition-ak" => proposition_ak(config),
        "lemma1.5" => lemma1_5(config),
        "lemma2" => lemma2(config),
        "coupling" => coupling(config),
        "theorem-q1" => theorem_q1(config),
        "theorem2" => theorem2(config),
        "lemma3" => lemma3(config),
        "lemma4" => lemma4(config),
        "lemma5-occupation" => lemma5_occupation(config),
        "lemma6" => lemma6(config),
        "lemma7-alpha" => lemma7_alpha(config),
        _ => unreachable!("name checked above"),
    }
}

/// Runs an experiment and writes its files into `config.output_dir`.
pub fn run_and_write(name: &str, config: &ExperimentConfig) -> Result<(RunOutput, Vec<PathBuf>), ExperimentError> {
    let out = run_experiment(name, config)?;
    let files = out.write(&config.output_dir)?;
    Ok((out, files))
}

/// Seed of replicate `i` within sweep point `point`.
fn replicate_seed(seed: u64, point: u64, i: u64) -> u64 {
    stream_key(stream_key(seed, point), i)
}

fn lemma1(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let heights: Vec<i64> = c.k_range.iter().map(|&h| h as i64).collect();
    let r = lemma1_pooled(c.lattice, &heights, c.n_steps, c.n_samples, c.seed)?;
    let mut report = Report::new("lemma1", c);
    report.check(Check::new(
        "pooled chi-square p-value",
        r.p_value > 0.01,
        "p > 0.01",
        format!("p = {:.6} (chi2 = {:.3}, dof = {})", r.p_value, r.statistic, r.dof),
    ));
    report.metric("statistic", r.statistic);
    report.metric("dof", r.dof);
    report.metric("p_value", r.p_value);
    report.metric("trapped", r.trapped);
    report.metric("skipped_heights", &r.skipped);
    report.metric(
        "per_height",
        r.tests
            .iter()
            .map(|t| json!({"height": t.height, "events": t.events, "statistic": t.statistic, "dof": t.dof, "p_value": t.p_value}))
            .collect::<Vec<_>>(),
    );
    for (h, n) in &r.skipped {
        report.note(format!("height {h} skipped: {n} conditioning events"));
    }
    let mut table = Table::new(&["height", "m_first", "observed", "expected"]);
    for t in &r.tests {
        for &(m, obs, exp) in &t.cells {
            table.push(row![t.height, m, obs, exp]);
        }
    }
    let mut out = RunOutput::new(report);
    out.table("", table);
    Ok(out)
}

/// Decomposition records of one walk, run until `U_{k_max}` is known.
fn records_until_u(kind: LatticeKind, k_max: usize, cap: u64, rng: &mut CounterRng) -> (Vec<ExcursionRecord>, bool) {
    let run = drive_excursions(kind, cap, rng, |t| {
        t.current_k() > k_max || (t.current_k() == k_max && t.partial().u.is_some())
    });
    let mut records = run.completed;
    records.push(run.partial);
    (records, run.trapped)
}

fn proposition_ak(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let ks: Vec<usize> = c.k_range.iter().map(|&k| k as usize).collect();
    let k_max = *ks.iter().max().unwrap();
    // Per walk: A_k for each k (None when U_k was not reached).
    let runs: Vec<(Vec<Option<bool>>, bool)> = (0..c.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::stream(c.seed, i);
            let (records, trapped) = records_until_u(c.lattice, k_max, c.n_steps, &mut rng);
            let events = ks
                .iter()
                .map(|&k| records.get(k).and_then(crossing_event_record))
                .collect();
            (events, trapped)
        })
        .collect();
    let mut estimates = Vec::new();
    let mut table = Table::new(&["k", "events", "runs", "censored", "p", "stderr"]);
    for (j, &k) in ks.iter().enumerate() {
        let seen: Vec<bool> = runs.iter().filter_map(|r| r.0[j]).collect();
        let hits = seen.iter().filter(|&&a| a).count() as u64;
        let e = Estimate::proportion(hits, seen.len() as u64, c.seed).with_meta("k", k);
        table.push(row![k, hits, seen.len(), c.n_samples - seen.len() as u64, e.value, e.stderr]);
        estimates.push(e);
    }
    let mut report = Report::new("proposition-ak", c);
    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0]);
    report.check(Check::new(
        "P(A_k) nonincreasing in k",
        nonincreasing,
        "p(k') <= p(k) for k < k'",
        format!("{values:?}"),
    ));
    let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    match fit_tail_exponent(&kf, &estimates) {
        Ok(fit) => {
            report.check(Check::new(
                "log-log slope",
                fit.slope <= -1.0,
                "slope <= -1.0 (claimed exponent -3/2)",
                format!("slope = {:.4}, r2 = {:.4}, dropped k = {:?}", fit.slope, fit.r_squared, fit.dropped),
            ));
            report.metric("slope", fit.slope);
            report.metric("intercept", fit.intercept);
            report.metric("r_squared", fit.r_squared);
            report.metric("dropped_k", &fit.dropped);
        }
        Err(e) => report.check(Check::new("log-log slope", false, "slope <= -1.0", e.to_string())),
    }
    report.metric("estimates", &estimates);
    report.metric("trapped", runs.iter().filter(|r| r.1).count());
    let mut out = RunOutput::new(report);
    out.table("", table);
    Ok(out)
}

fn lemma1_5(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let mut report = Report::new("lemma1.5", c);
    let mut table = Table::new(&["L", "n", "p_empirical", "stderr", "p_exact"]);
    let mut exit_table = Table::new(&["L", "m", "p_exact", "p_empirical", "stderr"]);
    for (point, &l) in c.k_range.iter().enumerate() {
        let l = l as i64;
        let samples = exit_time_samples(l, c.n_samples, stream_key(c.seed, point as u64))?;
        let law = EmpiricalExitLaw::from_samples(l, &samples);
        let horizon = ((l as f64).powf(1.5)).floor() as usize;
        let exact = exit_time_dp(l, DP_MAX_STEPS)?;
        let mut min_survival = f64::INFINITY;
        for n in 1..=horizon {
            let e = law.survival_estimate(n, c.seed);
            let p_exact = exact.survival(n).unwrap_or(f64::NAN);
            min_survival = min_survival.min(e.value);
            table.push(row![l, n, e.value, e.stderr, p_exact]);
        }
        for m in 1..=law.counts.len().min(exact.n_max()) {
            let p = law.prob(m);
            let se = (p * (1.0 - p) / law.n as f64).sqrt();
            exit_table.push(row![l, m, exact.prob(m).unwrap(), p, se]);
        }
        let exact_min = exact.survival(horizon).unwrap_or(f64::NAN);
        report.check(Check::new(
            &format!("L={l}: min P(eta >= n) over n <= L^1.5"),
            min_survival > 0.05,
            "> 0.05",
            format!("empirical {min_survival:.5} at n = {horizon} (exact {exact_min:.5})"),
        ));
        let tv = law.tv_distance(&exact);
        report.check(Check::new(
            &format!("L={l}: TV to exact law"),
            tv < 0.01,
            "< 0.01",
            format!("{tv:.5}"),
        ));
        report.metric(&format!("L{l}_min_survival"), min_survival);
        report.metric(&format!("L{l}_exact_min_survival"), exact_min);
        report.metric(&format!("L{l}_tv"), tv);
        report.metric(&format!("L{l}_tv_sampling_floor"), expected_sampling_tv(&exact, law.n));
    }
    let mut out = RunOutput::new(report);
    out.table("", table);
    out.table("exit-law", exit_table);
    Ok(out)
}

/// Expected TV distance between an `n`-sample empirical law and the exact law
/// itself, from the normal approximation `E|p_hat - p| = sqrt(2 p (1 - p) / (pi n))`.
fn expected_sampling_tv(exact: &crate::effective::ExitDistribution, n: u64) -> f64 {
    let cell = |p: f64| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n as f64)).sqrt();
    let cells: Vec<f64> = (1..=exact.n_max()).map(|m| cell(exact.prob(m).unwrap())).collect();
    let tail = (1.0 - exact.total_mass()).max(0.0);
    0.5 * (crate::stats::pairwise_sum(&cells) + cell(tail))
}

fn lemma2(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let k_first = *c.k_range.first().unwrap() as usize;
    let k_last = *c.k_range.last().unwrap() as usize;
    let k_max = *c.k_range.iter().max().unwrap() as usize;
    // Per walk: (W_{T_k}, H_{T_k}) for k = 1..=k_max, None if T_{k_max} was not reached.
    let runs: Vec<Option<Vec<(i64, i64)>>> = (0..c.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::stream(c.seed, i);
            let run = drive_excursions(c.lattice, c.n_steps, &mut rng, |t| t.current_k() >= k_max);
            if !run.stopped {
                return None;
            }
            let mut starts: Vec<(i64, i64)> = run
                .completed
                .iter()
                .map(|r| (r.t_start.width(), r.t_start.height()))
                .collect();
            starts.push((run.partial.t_start.width(), run.partial.t_start.height()));
            Some(starts[1..=k_max].to_vec())
        })
        .collect();
    let done: Vec<&Vec<(i64, i64)>> = runs.iter().flatten().collect();
    let censored = runs.len() - done.len();
    let ks: Vec<f64> = (1..=k_max).map(|k| k as f64).collect();
    let column = |k: usize, pick: fn(&(i64, i64)) -> i64| -> Vec<f64> { done.iter().map(|r| pick(&r[k - 1]) as f64).collect() };
    let mean_w: Vec<f64> = (1..=k_max).map(|k| mean(&column(k, |p| p.0))).collect();
    let median_w: Vec<f64> = (1..=k_max).map(|k| median(&column(k, |p| p.0))).collect();
    let slope = linear_fit(&ks, &mean_w)?.slope;
    let c_bar = 0.5 * slope;
    let prob = |k: usize, pick: fn(&(i64, i64)) -> i64, cc: f64| -> Estimate {
        let hits = done.iter().filter(|r| (pick(&r[k - 1]) as f64) < cc * k as f64).count() as u64;
        Estimate::proportion(hits, done.len() as u64, c.seed).with_meta("k", k)
    };
    let mut table = Table::new(&[
        "k",
        "mean_W",
        "median_W",
        "mean_H",
        "p_W_below_ck",
        "stderr_W",
        "p_H_below_ck",
        "stderr_H",
    ]);
    for k in 1..=k_max {
        let pw = prob(k, |p| p.0, c_bar);
        let ph = prob(k, |p| p.1, c_bar);
        table.push(row![
            k,
            mean_w[k - 1],
            median_w[k - 1],
            mean(&column(k, |p| p.1)),
            pw.value,
            pw.stderr,
            ph.value,
            ph.stderr
        ]);
    }
    let p_first = prob(k_first, |p| p.0, c_bar);
    let p_last = prob(k_last, |p| p.0, c_bar);
    let ratio = p_first.value / p_last.value;
    let mut report = Report::new("lemma2", c);
    report.check(Check::new(
        &format!("P(W_T_k < c k) drops between k={k_first} and k={k_last}"),
        ratio >= 5.0,
        "ratio >= 5",
        format!(
            "c = {c_bar:.4}; p({k_first}) = {:.5}, p({k_last}) = {:.5}, ratio = {ratio:.3}",
            p_first.value, p_last.value
        ),
    ));
    // The same ratio with c from the median growth, for context only.
    let median_slope = linear_fit(&ks, &median_w)?.slope;
    let c_med = 0.5 * median_slope;
    let (m_first, m_last) = (prob(k_first, |p| p.0, c_med), prob(k_last, |p| p.0, c_med));
    report.metric("mean_slope", slope);
    report.metric("c", c_bar);
    report.metric("p_first", &p_first);
    report.metric("p_last", &p_last);
    report.metric("ratio", ratio);
    report.metric("median_slope", median_slope);
    report.metric("median_c_ratio", m_first.value / m_last.value);
    report.metric("censored", censored);
    report.note(format!(
        "with c = half the slope of the median W_T_k instead ({c_med:.4}), p({k_first}) = {:.5} and p({k_last}) = {:.5}",
        m_first.value, m_last.value
    ));
    let mut out = RunOutput::new(report);
    out.table("", table);
    Ok(out)
}

fn coupling(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let n = c.n_steps as usize;
    // Truncation on simulated walks: per walk, the largest span and the altered
    // counts at a ladder of caps.
    let caps: Vec<u64> = (0..=20).map(|j| if j == 0 { 0 } else { 1u64 << (j - 1) }).collect();
    let walks: Vec<(u64, u64, Vec<u64>, u64)> = (0..c.n_samples)
        .into_par_iter()
        .map(|i| {
            let path = simulate(c.lattice, n, replicate_seed(c.seed, 0, i));
            let wide = coupling_equality_check(&path, &[TruncationCap::UNBOUNDED]);
            let fitted = coupling_equality_check(&path, &[TruncationCap(wide.max_span)]);
            let altered = caps
                .iter()
                .map(|&cap| coupling_equality_check(&path, &[TruncationCap(cap)]).altered)
                .collect();
            (
                fitted.excursions,
                fitted.altered + fitted.identity_violations,
                altered,
                wide.max_span,
            )
        })
        .collect();
    let excursions: u64 = walks.iter().map(|w| w.0).sum();
    let altered_at_max: u64 = walks.iter().map(|w| w.1).sum();
    let max_span = walks.iter().map(|w| w.3).max().unwrap_or(0);
    let mut cap_table = Table::new(&["cap", "excursions", "altered", "altered_fraction"]);
    let mut fractions = Vec::new();
    for (j, &cap) in caps.iter().enumerate() {
        let altered: u64 = walks.iter().map(|w| w.2[j]).sum();
        let frac = altered as f64 / excursions.max(1) as f64;
        fractions.push(frac);
        cap_table.push(row![cap, excursions, altered, frac]);
    }

    // Bookkeeping identity on effective-walk trajectories.
    let identity: Vec<(u64, u64, Option<Value>)> = (0..c.n_samples)
        .into_par_iter()
        .map(|i| {
            let s = crate::effective::simulate_effective(n, replicate_seed(c.seed, 1, i));
            let walk = build_coupled_walk(s);
            let ledger = &walk.ledger;
            let mut violations = 0u64;
            let mut correction = 0i64;
            let mut j = 1;
            for t in 0..=n {
                while j < ledger.taus.len() && ledger.taus[j] as usize <= t {
                    correction += ledger.deltas[j - 1];
                    j += 1;
                }
                if walk.s_hat[t] - walk.s.values[t] != correction {
                    violations += 1;
                }
            }
            let mut crossings = 0u64;
            for (jj, w) in ledger.taus.windows(2).enumerate() {
                let step = walk.s_hat[w[1] as usize] - walk.s_hat[w[0] as usize];
                let expected = if jj % 2 == 0 { -1 } else { 1 };
                if step != expected {
                    crossings += 1;
                }
            }
            let dump = (i == 0).then(|| json!({"taus": ledger.taus, "deltas": ledger.deltas}));
            (violations, crossings, dump)
        })
        .collect();
    let identity_violations: u64 = identity.iter().map(|r| r.0).sum();
    let crossing_violations: u64 = identity.iter().map(|r| r.1).sum();

    let mut report = Report::new("coupling", c);
    report.check(Check::new(
        "truncation with caps above every span",
        altered_at_max == 0,
        "0 excursions altered",
        format!("{altered_at_max} of {excursions} altered"),
    ));
    report.check(Check::new(
        "altered fraction monotone in cap",
        fractions.windows(2).all(|w| w[1] <= w[0]),
        "nonincreasing",
        format!("{:.4} at cap 0 to {:.4} at cap {}", fractions[0], fractions[fractions.len() - 1], caps[caps.len() - 1]),
    ));
    report.check(Check::new(
        "corrected-walk bookkeeping identity",
        identity_violations == 0,
        "0 violations",
        format!("{identity_violations} violations over {} trajectories of length {n}", c.n_samples),
    ));
    report.check(Check::new(
        "unit crossings at stopping times",
        crossing_violations == 0,
        "0 violations",
        format!("{crossing_violations}"),
    ));
    report.metric("excursions", excursions);
    report.metric("max_span", max_span);
    let mut out = RunOutput::new(report);
    out.table("", cap_table);
    let ledger: Vec<Value> = identity
        .into_iter()
        .filter_map(|r| r.2)
        .flat_map(|d| {
            let taus = d["taus"].as_array().cloned().unwrap_or_default();
            let deltas = d["deltas"].as_array().cloned().unwrap_or_default();
            taus.into_iter()
                .enumerate()
                .skip(1)
                .map(move |(j, t)| json!({"j": j, "tau": t, "delta": deltas[j - 1]}))
                .collect::<Vec<_>>()
        })
        .collect();
    out.ndjson.push(("ledger".to_string(), ledger));
    Ok(out)
}

fn theorem_q1(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    const BATCH: u64 = 64;
    let mut report = Report::new("theorem-q1", c);
    let mut table = Table::new(&["t", "accepted", "attempts", "trapped", "median", "q25", "q75"]);
    let mut curve = Table::new(&["t", "sup_distance"]);
    let mut medians = Vec::new();
    let max_attempts = 100 * c.n_samples;
    for (point, &t) in c.k_range.iter().enumerate() {
        let t = t as usize;
        let mut values = Vec::new();
        let mut attempts = 0u64;
        let mut trapped = 0u64;
        while (values.len() as u64) < c.n_samples && attempts < max_attempts {
            let batch: Vec<(Option<f64>, bool)> = (attempts..attempts + BATCH)
                .into_par_iter()
                .map(|i| {
                    let path = simulate(c.lattice, t, replicate_seed(c.seed, point as u64, i));
                    if path.len() < t {
                        return (None, true);
                    }
                    if !quadrant_event(&path) {
                        return (None, false);
                    }
                    (Some(sup_distance(&path, &corner_trace(&path), t)), false)
                })
                .collect();
            attempts += BATCH;
            for (v, tr) in batch {
                trapped += tr as u64;
                if let Some(v) = v {
                    if (values.len() as u64) < c.n_samples {
                        values.push(v);
                    }
                }
            }
        }
        let m = median(&values);
        medians.push(m);
        table.push(row![t, values.len(), attempts, trapped, m, quantile(&values, 0.25), quantile(&values, 0.75)]);
        if point + 1 == c.k_range.len() {
            // Running sup-distance curve of the first walk at this scale.
            let path = simulate(c.lattice, t, replicate_seed(c.seed, point as u64, 0));
            let trace = corner_trace(&path);
            let sup = running_sup_distance(&path, &trace);
            let mut s = 1usize;
            while s < sup.len() {
                curve.push(row![s, sup[s] / s as f64]);
                s = (s * 5).div_ceil(4);
            }
        }
        if (values.len() as u64) < c.n_samples {
            report.note(format!("t={t}: only {} accepted runs after {attempts} attempts", values.len()));
        }
    }
    let (first, last) = (medians[0], medians[medians.len() - 1]);
    report.check(Check::new(
        "median sup distance shrinks",
        last < 0.5 * first,
        "median(t_last) < 0.5 median(t_first)",
        format!("{first:.6} -> {last:.6} (ratio {:.4})", last / first),
    ));
    report.metric("medians", &medians);
    let mut out = RunOutput::new(report);
    out.table("", table);
    out.table("curve", curve);
    Ok(out)
}

/// Walks used for the time-change constant in endpoint comparisons.
pub const ALPHA_RUNS: u64 = 200;

fn alpha_metrics(report: &mut Report, a: &AlphaEstimate) {
    report.metric("alpha", a.value);
    report.metric("alpha_stderr", a.stderr);
    report.metric("alpha_ci", [a.ci_low, a.ci_high]);
    report.metric("alpha_runs", a.slopes.len());
    report.metric("alpha_trapped", a.trapped);
}

fn theorem2(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    const PERMUTATIONS: usize = 200;
    let t = c.n_steps as usize;
    let alpha = estimate_alpha(c.lattice, t, ALPHA_RUNS as usize, c.seed);
    let endpoints: Vec<Option<PlanePoint>> = (0..c.n_samples)
        .into_par_iter()
        .map(|i| {
            let path = simulate(c.lattice, t, replicate_seed(c.seed, 1, i));
            (path.len() == t).then(|| embed(c.lattice, path.current()).scale(1.0 / t as f64))
        })
        .collect();
    let trapped = endpoints.iter().filter(|e| e.is_none()).count();
    let endpoints: Vec<PlanePoint> = endpoints.into_iter().flatten().collect();
    let limits: Vec<PlanePoint> = (0..c.n_samples)
        .into_par_iter()
        .map(|i| {
            let w = sample_brownian(alpha.value, c.grid_step, replicate_seed(c.seed, 2, i))?;
            Ok(z_functional(&w, [1.0, 1.0, 1.0], 1.0, alpha.value)?.plane_projection())
        })
        .collect::<Result<_, ExperimentError>>()?;
    let stat_seed = stream_key(c.seed, 3);
    let energy = energy_distance_2d_seeded(&endpoints, &limits, stat_seed)?;
    let null = energy_permutation_null(&endpoints, &limits, PERMUTATIONS, stat_seed)?;
    let q95 = quantile(&null, 0.95);
    let ci_width = alpha.ci_high - alpha.ci_low;
    let mut report = Report::new("theorem2", c);
    let mut check = Check::new(
        "energy distance to Z samples",
        energy < q95,
        "below the 95th percentile of the permutation null",
        format!("energy {energy:.6}, null q95 {q95:.6}, alpha {:.4} (CI width {ci_width:.4})", alpha.value),
    );
    if check.status == Status::Fail && ci_width > 0.2 {
        check.status = Status::Warn;
        report.note("energy check downgraded to a warning: the alpha interval is wider than 0.2");
    }
    report.check(check);
    report.note("Z uses u = 1 (u = s/t at s = t); its e3 part is orthogonal to the lattice plane and projects to zero");
    alpha_metrics(&mut report, &alpha);
    let symmetrized: Vec<PlanePoint> = limits
        .iter()
        .enumerate()
        .map(|(i, &p)| lattice_symmetry(c.lattice, p, CounterRng::stream(stream_key(c.seed, 4), i as u64).below(12)))
        .collect();
    let energy_sym = energy_distance_2d_seeded(&endpoints, &symmetrized, stat_seed)?;
    report.note(format!(
        "energy distance after a uniform random lattice symmetry of each Z sample: {energy_sym:.6} (diagnostic, not gated)"
    ));
    report.metric("energy", energy);
    report.metric("null_q95", q95);
    report.metric("energy_symmetrized", energy_sym);
    report.metric("trapped", trapped);
    report.metric("mean_endpoint", [mean(&endpoints.iter().map(|p| p.x).collect::<Vec<_>>()), mean(&endpoints.iter().map(|p| p.y).collect::<Vec<_>>())]);
    report.metric("mean_limit", [mean(&limits.iter().map(|p| p.x).collect::<Vec<_>>()), mean(&limits.iter().map(|p| p.y).collect::<Vec<_>>())]);
    let mut table = Table::new(&["source", "x", "y"]);
    for p in &endpoints {
        table.push(row!["walk", p.x, p.y]);
    }
    for p in &limits {
        table.push(row!["limit", p.x, p.y]);
    }
    let mut out = RunOutput::new(report);
    out.table("", table);
    Ok(out)
}

/// Element `g` of the point group of the lattice acting on the plane: a
/// rotation by `g / 2` turns, followed by a reflection in the x axis when `g` is odd.
fn lattice_symmetry(kind: LatticeKind, p: PlanePoint, g: u32) -> PlanePoint {
    let order = kind.degree() as u32;
    let g = g % (2 * order);
    let theta = std::f64::consts::TAU * (g / 2) as f64 / order as f64;
    let (s, c) = theta.sin_cos();
    let r = PlanePoint::new(c * p.x - s * p.y, s * p.x + c * p.y);
    if g % 2 == 1 {
        PlanePoint::new(r.x, -r.y)
    } else {
        r
    }
}

/// `p(n_1) >= p(n_2) >= …` with a strict overall drop (or identically zero).
fn decreasing_trend(p: &[f64]) -> bool {
    let monotone = p.windows(2).all(|w| w[1] <= w[0]);
    monotone && (p[p.len() - 1] < p[0] || p.iter().all(|&x| x == 0.0))
}

/// Statistics of `n_samples` coupled samples at every `n` in `k_range`.
fn coupled_sweep<F>(c: &ExperimentConfig, stats: F) -> Vec<Vec<Vec<f64>>>
where
    F: Fn(usize, &crate::limit::CoupledSample) -> Vec<f64> + Sync,
{
    c.k_range
        .iter()
        .enumerate()
        .map(|(point, &n)| {
            (0..c.n_samples)
                .into_par_iter()
                .map(|i| stats(n as usize, &coupled_sample(n as usize, replicate_seed(c.seed, point as u64, i))))
                .collect()
        })
        .collect()
}

/// Exceedance summary of statistic `j` against per-`n` thresholds.
fn exceedance_rows(
    c: &ExperimentConfig,
    name: &str,
    values: &[Vec<Vec<f64>>],
    j: usize,
    threshold: impl Fn(usize) -> f64,
    table: &mut Table,
) -> Vec<f64> {
    let mut probs = Vec::new();
    for (point, &n) in c.k_range.iter().enumerate() {
        let col: Vec<f64> = values[point].iter().map(|r| r[j]).collect();
        let thr = threshold(n as usize);
        let hits = col.iter().filter(|&&v| v > thr).count() as u64;
        let e = Estimate::proportion(hits, col.len() as u64, c.seed);
        table.push(row![name, n, thr, median(&col), e.value, e.stderr]);
        probs.push(e.value);
    }
    probs
}

fn trend_check(report: &mut Report, name: &str, probs: &[f64]) {
    report.check(Check::new(
        name,
        decreasing_trend(probs),
        "exceedance probability decreasing in n",
        format!("{probs:?}"),
    ));
}

const SWEEP_HEADER: [&str; 6] = ["statistic", "n", "threshold", "median", "exceed_prob", "stderr"];

fn lemma3(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let values = coupled_sweep(c, |_, s| vec![lemma3_on(&s.coupled)]);
    let mut table = Table::new(&SWEEP_HEADER);
    let probs = exceedance_rows(c, "sup|S-S_hat|", &values, 0, |n| power_threshold(n, c.delta), &mut table);
    let mut report = Report::new("lemma3", c);
    trend_check(&mut report, "P(sup|S - S_hat| > n^(1/3+delta))", &probs);
    report.metric("exceed_prob", &probs);
    let mut out = RunOutput::new(report);
    out.table("", table);
    Ok(out)
}

fn lemma4(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let delta = c.delta;
    let values = coupled_sweep(c, |n, s| {
        let cube = (n as f64).cbrt();
        vec![lemma4_upper_on(&s.coupled, cube + delta), lemma4_lower_on(&s.coupled, -cube + delta)]
    });
    let mut table = Table::new(&SWEEP_HEADER);
    let eps = c.epsilon;
    let upper = exceedance_rows(c, "upper", &values, 0, |_| eps, &mut table);
    let lower = exceedance_rows(c, "lower", &values, 1, |_| eps, &mut table);
    let mut report = Report::new("lemma4", c);
    trend_check(&mut report, "P(upper occupation gap > epsilon)", &upper);
    report.metric("exceed_prob_upper", &upper);
    report.metric("exceed_prob_lower", &lower);
    report.note(format!(
        "lower display (threshold -n^(1/3) + delta) exceedance: {lower:?}; reported, not gated"
    ));
    let mut out = RunOutput::new(report);
    out.table("", table);
    Ok(out)
}

/// Samples for the arcsine comparison of the corrected walk's occupation fraction.
pub const ARCSINE_SAMPLES: u64 = 2000;

fn lemma5_occupation(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let delta = c.delta;
    let values = coupled_sweep(c, |n, s| {
        vec![
            lemma5_upper_on(s, power_threshold(n, delta)),
            lemma5_lower_on(s, (n as f64).powf(-1.0 / 3.0 + delta)),
            lemma5_on(s, SIGMA),
        ]
    });
    let mut table = Table::new(&SWEEP_HEADER);
    let eps = c.epsilon;
    let upper = exceedance_rows(c, "upper", &values, 0, |_| eps, &mut table);
    let lower = exceedance_rows(c, "lower", &values, 1, |_| eps, &mut table);
    let brownian = exceedance_rows(c, "sup|S_hat-sigma*B|", &values, 2, |n| power_threshold(n, delta), &mut table);
    let mut report = Report::new("lemma5-occupation", c);
    trend_check(&mut report, "P(upper occupation gap > epsilon)", &upper);

    let n = c.n_steps as usize;
    let fractions: Vec<f64> = (0..ARCSINE_SAMPLES)
        .into_par_iter()
        .map(|i| occupation_fraction(&coupled_sample(n, replicate_seed(c.seed, u64::MAX, i)).coupled))
        .collect();
    let ks = ks_distance(&fractions, |x| arcsine_cdf(x.clamp(0.0, 1.0)).unwrap_or(f64::NAN))?;
    report.check(Check::new(
        "occupation fraction vs arcsine law",
        ks < 0.05,
        "KS < 0.05",
        format!("KS = {ks:.5} (n = {n}, {ARCSINE_SAMPLES} walks)"),
    ));
    // Scale check for the same-seed Brownian pairing.
    let per_n: Vec<f64> = c
        .k_range
        .iter()
        .enumerate()
        .map(|(p, &nn)| median(&values[p].iter().map(|r| r[2] / nn as f64).collect::<Vec<_>>()))
        .collect();
    report.metric("exceed_prob_upper", &upper);
    report.metric("exceed_prob_lower", &lower);
    report.metric("exceed_prob_brownian", &brownian);
    report.metric("median_brownian_gap_over_n", &per_n);
    report.metric("arcsine_ks", ks);
    report.note(format!("lower display (threshold n^(-1/3+delta)) exceedance: {lower:?}; reported, not gated"));
    report.note(format!(
        "sup|S_hat - 2B| > n^(1/3+delta) under the quantile pairing (not a strong coupling): {brownian:?}; reported, not gated"
    ));
    let mut out = RunOutput::new(report);
    out.table("", table);
    Ok(out)
}

fn lemma6(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    const PERMUTATIONS: usize = 200;
    let n = c.n_steps as usize;
    let vectors = StepVectors::default_for(LatticeKind::Triangular);
    let rows: Vec<(PlanePoint, u64)> = (0..c.n_samples)
        .into_par_iter()
        .map(|i| {
            let s = coupled_sample(n, replicate_seed(c.seed, 0, i));
            let g = gamma_path(&s.coupled, vectors);
            let bad = g
                .windows(2)
                .filter(|w| {
                    let d = w[1] - w[0];
                    [vectors.neg, vectors.zero, vectors.pos].iter().all(|v| d.dist(*v) > 1e-9)
                })
                .count() as u64;
            (g[n].scale(1.0 / n as f64), bad)
        })
        .collect();
    let telescoping: u64 = rows.iter().map(|r| r.1).sum();
    let gammas: Vec<PlanePoint> = rows.iter().map(|r| r.0).collect();
    let limits: Vec<PlanePoint> = (0..c.n_samples)
        .into_par_iter()
        .map(|i| {
            let w = sample_brownian(1.0, c.grid_step, replicate_seed(c.seed, 1, i))?;
            Ok(z_functional(&w, [1.0, 1.0, 1.0], 1.0, 1.0)?.plane_projection())
        })
        .collect::<Result<_, ExperimentError>>()?;
    let stat_seed = stream_key(c.seed, 2);
    let energy = energy_distance_2d_seeded(&gammas, &limits, stat_seed)?;
    let null = energy_permutation_null(&gammas, &limits, PERMUTATIONS, stat_seed)?;
    let q95 = quantile(&null, 0.95);
    let mut report = Report::new("lemma6", c);
    report.check(Check::new(
        "Gamma increments are step vectors",
        telescoping == 0,
        "0 violations",
        format!("{telescoping}"),
    ));
    report.check(Check::new(
        "Gamma_n / n vs Z(1,1,1) at u = alpha = 1",
        energy < q95,
        "below the 95th percentile of the permutation null",
        format!("energy {energy:.6}, null q95 {q95:.6}"),
    ));
    report.note("compares the partial-sum approximant with the limit functional; the prudent-walk side of the lemma needs the walk's own effective walk, which is not constructed");
    report.metric("energy", energy);
    report.metric("null_q95", q95);
    let mut table = Table::new(&["source", "x", "y"]);
    for p in &gammas {
        table.push(row!["gamma", p.x, p.y]);
    }
    for p in &limits {
        table.push(row!["limit", p.x, p.y]);
    }
    let mut out = RunOutput::new(report);
    out.table("", table);
    Ok(out)
}

fn lemma7_alpha(c: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    let a = estimate_alpha(c.lattice, c.n_steps as usize, c.n_samples as usize, c.seed);
    let mut report = Report::new("lemma7-alpha", c);
    match c.lattice {
        LatticeKind::Square => {
            let target = 7.0 / 3.0;
            report.check(Check::new(
                "95% interval covers 7/3",
                a.covers(target),
                "ci_low <= 7/3 <= ci_high",
                format!("{:.5} [{:.5}, {:.5}]", a.value, a.ci_low, a.ci_high),
            ));
            report.check(Check::new(
                "interval half-width",
                a.half_width() <= 0.12,
                "<= 0.12",
                format!("{:.5}", a.half_width()),
            ));
        }
        LatticeKind::Triangular => {
            report.check(Check::new(
                "estimate reported",
                a.value.is_finite() && a.stderr.is_finite(),
                "finite estimate and interval",
                format!("{:.5} [{:.5}, {:.5}]", a.value, a.ci_low, a.ci_high),
            ));
        }
    }
    alpha_metrics(&mut report, &a);
    let mut table = Table::new(&["run", "slope"]);
    for (i, s) in a.slopes.iter().enumerate() {
        table.push(row![i, *s]);
    }
    let mut pairs = Table::new(&["m", "t_of_m"]);
    let (tc, _) = simulate_time_change(c.lattice, c.n_steps as usize, c.seed, 0);
    for &(m, t) in &tc.pairs {
        pairs.push(row![m, t]);
    }
    let mut out = RunOutput::new(report);
    out.table("", table);
    out.table("time-change", pairs);
    Ok(out)
}

/// Reads every `*.json` report in `dir`, sorted by file name.
pub fn collect_reports(dir: &Path) -> Result<Vec<(PathBuf, Report)>, ExperimentError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        if let Ok(r) = serde_json::from_str::<Report>(&text) {
            out.push((p, r));
        }
    }
    Ok(out)
}
