use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use pwl_core::effective::{exit_time_dp, exit_time_samples, EmpiricalExitLaw, DP_MAX_STEPS};
use pwl_core::experiments::{collect_reports, run_and_write, ExperimentConfig, ExperimentError, Status, EXPERIMENTS};
use pwl_core::lattice::LatticeKind;
use pwl_core::output::{write_csv, Table};
use pwl_core::prudent::simulate;
use pwl_core::row;

#[derive(Parser)]
#[command(name = "pwl", version, about = "Prudent walk Monte Carlo laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one kinetic prudent walk and print a JSON summary.
    Simulate {
        #[arg(long, default_value = "tri")]
        lattice: LatticeKind,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write every site as NDJSON (t, a, b, width, height).
        #[arg(long)]
        dump_path: Option<PathBuf>,
    },
    /// Exit times of the effective walk from a box, exact and sampled.
    ExitTimes {
        #[arg(long = "L")]
        l: i64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named experiment.
    Experiment {
        name: String,
        /// JSON config; missing fields take the experiment's defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarise the reports in a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print an experiment's default config as JSON.
    Config { name: String },
    /// List experiment names.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("PWL_THREADS") {
        match v.parse::<usize>() {
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => {
                eprintln!("error: PWL_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<bool, ExperimentError> {
    match command {
        Command::Simulate {
            lattice,
            steps,
            seed,
            dump_path,
        } => {
            let path = simulate(lattice, steps, seed);
            if let Some(dump) = dump_path {
                let mut w = BufWriter::new(File::create(dump)?);
                for (t, b) in path.boxes().iter().enumerate() {
                    let p = path.sites()[t];
                    let line = json!({"t": t, "a": p.a, "b": p.b, "width": b.width(), "height": b.height()});
                    writeln!(w, "{line}")?;
                }
                w.flush()?;
            }
            let end = path.current();
            let summary = json!({
                "lattice": lattice,
                "seed": seed,
                "requested_steps": steps,
                "steps": path.len(),
                "trapped": path.trapped(),
                "end": {"a": end.a, "b": end.b},
                "width": path.bbox().width(),
                "height": path.bbox().height(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::ExitTimes { l, samples, seed, out } => {
            let exact = exit_time_dp(l, DP_MAX_STEPS)?;
            let law = EmpiricalExitLaw::from_samples(l, &exit_time_samples(l, samples, seed)?);
            let mut table = Table::new(&["L", "m", "p_exact", "p_empirical", "stderr"]);
            let last = law.counts.len().max(1).min(exact.n_max());
            for m in 1..=last {
                let p = law.prob(m);
                let se = (p * (1.0 - p) / law.n as f64).sqrt();
                table.push(row![l, m, exact.prob(m).unwrap_or(0.0), p, se]);
            }
            write_csv(&out, &table)?;
            println!("tv_distance={:.6}", law.tv_distance(&exact));
            Ok(true)
        }
        Command::Experiment { name, config, out } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_file(&path)?,
                None => ExperimentConfig::defaults_for(&name)?,
            };
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let (run, files) = run_and_write(&name, &cfg)?;
            let stdout = io::stdout();
            let mut w = stdout.lock();
            for c in &run.report.checks {
                writeln!(w, "{} {}: {} [{}]", status_word(c.status), c.name, c.observed, c.bar)?;
            }
            for n in &run.report.notes {
                writeln!(w, "note: {n}")?;
            }
            for f in files {
                writeln!(w, "wrote {}", f.display())?;
            }
            Ok(run.report.passed)
        }
        Command::Report { dir } => {
            let reports = collect_reports(&dir)?;
            let mut all = true;
            for (_, r) in &reports {
                all &= r.passed;
                println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.experiment);
                for c in &r.checks {
                    println!("  {} {}: {}", status_word(c.status), c.name, c.observed);
                }
            }
            if reports.is_empty() {
                eprintln!("no reports in {}", dir.display());
            }
            Ok(all)
        }
        Command::Config { name } => {
            let cfg = ExperimentConfig::defaults_for(&name)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(true)
        }
        Command::List => {
            for name in EXPERIMENTS {
                println!("{name}");
            }
            Ok(true)
        }
    }
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Warn => "WARN",
    }
}
