use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cliplab::config::{Experiment, ExperimentConfig};
use cliplab::diagnostics::CheckRow;
use cliplab::harness::{self, TrialSummary};
use cliplab::output::{experiment_dir, write_csv, write_json_lines};
use cliplab::Error;

#[derive(Parser)]
#[command(
    name = "cliplab",
    version,
    about = "Clipped stochastic gradient experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured trials and write per-seed results.
    Run(Common),
    /// Fit the log-log rate over the configured horizon grid.
    Rates {
        #[command(flatten)]
        common: OptionalConfig,
        /// Fit an exact power law instead of running trials.
        #[arg(long)]
        self_test: bool,
    },
    /// Run the enabled diagnostics; exits 1 if any check fails.
    Diagnose(Common),
    /// Compare the clipped method with unclipped SGD on paired seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Step size of the unclipped baseline.
        #[arg(long)]
        vanilla_eta: Option<f64>,
    },
}

#[derive(Args)]
struct Overrides {
    /// Override a config value, e.g. `--set noise.p=1.5` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides experiment.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of seeds (overrides experiment.seeds).
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct OptionalConfig {
    #[arg(long, required_unless_present = "self_test")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

enum Failure {
    Config(String),
    Runtime(String),
    ChecksFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::InfiniteMoment { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

struct Loaded {
    exp: Experiment,
    out: PathBuf,
    seeds: usize,
    jobs: usize,
}

fn load(config: &Path, o: &Overrides) -> Result<Loaded, Failure> {
    let mut set = o.set.clone();
    if let Some(n) = o.seeds {
        set.push(format!("experiment.seeds={n}"));
    }
    let cfg = ExperimentConfig::load(config, &set)?;
    let out = o
        .out
        .clone()
        .unwrap_or_else(|| cfg.experiment.output_dir.clone());
    let seeds = cfg.experiment.seeds;
    Ok(Loaded {
        exp: cfg.build()?,
        out,
        seeds,
        jobs: o.jobs,
    })
}

fn target_dir(l: &Loaded) -> PathBuf {
    let c = &l.exp.config;
    experiment_dir(
        &l.out,
        &c.experiment.id,
        c.experiment.algorithm,
        l.exp.noise.p(),
    )
}

/// The summary as JSON without the per-seed outcomes.
fn summary_json(s: &TrialSummary) -> Result<serde_json::Value, Failure> {
    let mut v = serde_json::to_value(s).map_err(|e| Failure::Runtime(e.to_string()))?;
    if let Some(m) = v.as_object_mut() {
        m.remove("outcomes");
    }
    Ok(v)
}

fn print_summary(s: &TrialSummary) {
    println!(
        "T={} seeds={} median={:.6e} q{:.2}={:.6e}",
        s.horizon,
        s.seeds,
        s.median,
        1.0 - s.delta,
        s.upper_quantile
    );
    if let (Some(b), Some(r)) = (s.bound, s.failure_rate) {
        println!("bound={b:.6e} failure_rate={r:.4} (delta={})", s.delta);
    }
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_run(c: &Common) -> Result<(), Failure> {
    let l = load(&c.config, &c.overrides)?;
    let horizon = l.exp.config.horizon()?;
    let s = harness::run_trials(&l.exp, horizon, l.seeds, l.jobs)?;
    let dir = target_dir(&l);
    write_csv(&dir.join("seed-results.csv"), &s.outcomes)?;
    write_json_lines(&dir.join("summary.jsonl"), &[summary_json(&s)?])?;
    print_summary(&s);
    println!("wrote {}", dir.display());
    Ok(())
}

fn print_fit(fit: &harness::RateFit) {
    println!("slope={:.6} r2={:.6}", fit.slope, fit.r_squared);
    if let Some(t) = fit.theoretical {
        println!("target={t:.6} deviation={:.6}", fit.slope - t);
    }
}

fn cmd_rates(c: &OptionalConfig, self_test: bool) -> Result<(), Failure> {
    if self_test {
        let horizons = [256usize, 512, 1024, 2048, 4096];
        let metrics: Vec<f64> = horizons
            .iter()
            .map(|&t| 7.0 * (t as f64).powf(-0.5))
            .collect();
        print_fit(&harness::fit_rate(&horizons, &metrics, Some(-0.5))?);
        return Ok(());
    }
    let config = c.config.as_ref().expect("clap enforces --config");
    let l = load(config, &c.overrides)?;
    let (fit, trials) = harness::rate_sweep(&l.exp, l.seeds, l.jobs)?;
    let dir = target_dir(&l);
    #[derive(serde::Serialize)]
    struct Row {
        horizon: usize,
        median: f64,
        upper_quantile: f64,
        bound: Option<f64>,
        failure_rate: Option<f64>,
    }
    let rows: Vec<Row> = trials
        .iter()
        .map(|s| Row {
            horizon: s.horizon,
            median: s.median,
            upper_quantile: s.upper_quantile,
            bound: s.bound,
            failure_rate: s.failure_rate,
        })
        .collect();
    write_csv(&dir.join("rates.csv"), &rows)?;
    write_json_lines(&dir.join("rates.jsonl"), &[&fit])?;
    print_fit(&fit);
    Ok(())
}

fn cmd_diagnose(c: &Common) -> Result<(), Failure> {
    let l = load(&c.config, &c.overrides)?;
    let horizon = l.exp.config.horizon()?;
    let report = harness::diagnose(&l.exp, horizon, l.seeds, l.jobs)?;
    let mut rows: Vec<CheckRow> = Vec::new();
    if let Some(cond) = &report.conditions {
        for ch in &cond.checks {
            rows.push(CheckRow {
                name: format!("condition:{}", ch.name),
                steps: cond.horizon,
                violations: (!ch.status.is_ok()) as usize,
                max_margin: -ch.margin,
                stderr: 0.0,
            });
        }
    }
    rows.extend(report.checks.iter().cloned());
    let dir = target_dir(&l);
    write_csv(&dir.join("diagnostics.csv"), &rows)?;
    write_json_lines(&dir.join("diagnostics.jsonl"), &[&report])?;
    for r in &rows {
        println!(
            "{:<32} {} steps={} violations={} max_margin={:.3e}",
            r.name,
            if r.passed() { "PASS" } else { "FAIL" },
            r.steps,
            r.violations,
            r.max_margin
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}

fn cmd_compare(c: &Common, vanilla_eta: Option<f64>) -> Result<(), Failure> {
    let l = load(&c.config, &c.overrides)?;
    let horizon = l.exp.config.horizon()?;
    let report = harness::compare_clipped_vanilla(&l.exp, horizon, l.seeds, l.jobs, vanilla_eta)?;
    let dir = target_dir(&l);
    write_csv(&dir.join("compare.csv"), &report.pairs)?;
    let mut v = serde_json::to_value(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
    if let Some(m) = v.as_object_mut() {
        m.remove("pairs");
    }
    write_json_lines(&dir.join("compare.jsonl"), &[v])?;
    println!(
        "clipped median={:.6e} vanilla median={:.6e} ratio={:.4} clipped wins={}/{} vanilla diverged={}",
        report.clipped_median,
        report.vanilla_median,
        report.ratio,
        report.clipped_wins,
        report.seeds,
        report.vanilla_diverged
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Rates { common, self_test } => cmd_rates(common, *self_test),
        Command::Diagnose(c) => cmd_diagnose(c),
        Command::Compare {
            common,
            vanilla_eta,
        } => cmd_compare(common, *vanilla_eta),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::ChecksFailed) => {
            eprintln!("diagnostics failed");
            ExitCode::from(1)
        }
    }
}
