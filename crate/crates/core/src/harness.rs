//! Multi-seed orchestration: failure rates against the explicit bounds,
//! log-log rate fits, the clipped-versus-vanilla comparison and the
//! diagnostics sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    run_asmd, run_sgd, run_smd, run_vanilla_sgd, Algorithm, RunOptions, RunRecord,
};
use crate::config::Experiment;
use crate::diagnostics::{
    check_clip_error_bounds, check_mgf_bound, check_pathwise_asmd, check_pathwise_sgd,
    check_pathwise_smd, martingale_trace_sgd, martingale_trace_smd, mgf_lambda_grid, CheckRow,
    ScalarLaw,
};
use crate::error::{Error, Result};
use crate::noise::Oracle;
use crate::rng;
use crate::schedules::{verify_conditions, ConditionReport, Family};
use crate::stats::{self, binomial_stderr, linear_fit};

/// Seed counts below this trigger a warning about wide binomial intervals.
pub const MIN_SEEDS_FOR_RATES: usize = 30;

/// Runs `f(seed)` for seed = base, base+1, ... in a pool of `jobs` threads
/// (0 = all cores). Results come back in seed order regardless of `jobs`.
pub fn par_seeds<T, F>(base_seed: u64, seeds: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..seeds as u64)
            .into_par_iter()
            .map(|i| f(base_seed.wrapping_add(i)))
            .collect()
    })
}

/// One seeded run of the configured algorithm.
pub fn run_single(
    exp: &Experiment,
    horizon: usize,
    seed: u64,
    opts: RunOptions,
) -> Result<RunRecord> {
    let mut oracle = Oracle::new(&exp.problem, &exp.noise, seed)?;
    let algorithm = exp.config.experiment.algorithm;
    if algorithm == Algorithm::VanillaSgd {
        let eta = exp
            .config
            .schedule
            .eta
            .ok_or_else(|| Error::Config("schedule.eta: missing".into()))?;
        return run_vanilla_sgd(&mut oracle, eta, horizon, &exp.x1, opts);
    }
    let mut schedule = exp.schedule(horizon)?;
    match algorithm {
        Algorithm::Smd => run_smd(&mut oracle, &mut schedule, horizon, &exp.x1, opts),
        Algorithm::Asmd => run_asmd(&mut oracle, &mut schedule, horizon, &exp.x1, opts),
        Algorithm::Sgd => run_sgd(&mut oracle, &schedule, horizon, &exp.x1, opts),
        Algorithm::VanillaSgd => unreachable!(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub summary: f64,
    pub final_gap: f64,
    pub clipped_fraction: f64,
    pub diverged: bool,
    pub exceeds_bound: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub id: String,
    pub digest: String,
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seeds: usize,
    pub base_seed: u64,
    pub delta: f64,
    pub median: f64,
    /// Empirical (1 − δ)-quantile of the summary metric.
    pub upper_quantile: f64,
    /// The explicit high-probability bound for this horizon, if the schedule has one.
    pub bound: Option<f64>,
    pub failure_rate: Option<f64>,
    pub failure_stderr: Option<f64>,
    pub outcomes: Vec<TrialOutcome>,
    pub warnings: Vec<String>,
}

impl TrialSummary {
    /// Failure rate within δ + 3 binomial standard errors at rate δ.
    pub fn failure_rate_ok(&self) -> Option<bool> {
        self.failure_rate
            .map(|r| r <= self.delta + 3.0 * binomial_stderr(self.delta, self.seeds))
    }

    pub fn summaries(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.summary).collect()
    }
}

/// Runs `seeds` independent runs of length `horizon` and compares each
/// summary metric with the explicit bound of the configured schedule.
pub fn run_trials(
    exp: &Experiment,
    horizon: usize,
    seeds: usize,
    jobs: usize,
) -> Result<TrialSummary> {
    let cfg = &exp.config;
    let bound = if cfg.experiment.algorithm == Algorithm::VanillaSgd {
        None
    } else {
        exp.schedule(horizon)?.rate_bound(horizon)
    };
    let outcomes = par_seeds(cfg.experiment.base_seed, seeds, jobs, |seed| {
        let r = run_single(exp, horizon, seed, RunOptions::summary_only())?;
        Ok(TrialOutcome {
            seed,
            summary: r.summary,
            final_gap: r.final_gap,
            clipped_fraction: r.clipped_fraction(),
            diverged: r.diverged,
            exceeds_bound: bound.map(|b| !(r.summary <= b)),
        })
    })?;
    let values: Vec<f64> = outcomes.iter().map(|o| o.summary).collect();
    let delta = cfg.experiment.delta;
    let failure_rate = bound.map(|_| {
        outcomes
            .iter()
            .filter(|o| o.exceeds_bound == Some(true))
            .count() as f64
            / seeds as f64
    });
    let mut warnings = Vec::new();
    if seeds < MIN_SEEDS_FOR_RATES {
        warnings.push(format!(
            "only {seeds} seeds; binomial intervals on the failure rate are wide"
        ));
    }
    Ok(TrialSummary {
        id: cfg.experiment.id.clone(),
        digest: cfg.digest()?,
        algorithm: cfg.experiment.algorithm,
        horizon,
        seeds,
        base_seed: cfg.experiment.base_seed,
        delta,
        median: stats::median(&values),
        upper_quantile: stats::quantile(&values, 1.0 - delta),
        bound,
        failure_stderr: failure_rate.map(|r| binomial_stderr(r, seeds)),
        failure_rate,
        outcomes,
        warnings,
    })
}

/// The exponent of T in the leading term of each method's rate:
/// (1−p)/p for mirror descent, −2 for the accelerated method in the
/// noise-free regime, (2−2p)/(3p−2) for nonconvex SGD.
pub fn theoretical_exponent(algorithm: Algorithm, p: f64) -> Option<f64> {
    match algorithm {
        Algorithm::Smd => Some((1.0 - p) / p),
        Algorithm::Asmd => Some(-2.0),
        Algorithm::Sgd => Some((2.0 - 2.0 * p) / (3.0 * p - 2.0)),
        Algorithm::VanillaSgd => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub horizons: Vec<usize>,
    pub metrics: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theoretical: Option<f64>,
    /// slope − theoretical.
    pub deviation: Option<f64>,
}

/// Least squares fit of log(metric) on log(T). Needs at least four points.
pub fn fit_rate(horizons: &[usize], metrics: &[f64], theoretical: Option<f64>) -> Result<RateFit> {
    if horizons.len() != metrics.len() {
        return Err(Error::DimensionMismatch {
            expected: horizons.len(),
            got: metrics.len(),
        });
    }
    if horizons.len() < 4 {
        return Err(Error::invalid(
            "horizons",
            "a rate fit needs at least 4 horizons",
        ));
    }
    if let Some((index, &value)) = metrics
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::NonPositiveMetric { index, value });
    }
    let x: Vec<f64> = horizons.iter().map(|&t| (t as f64).ln()).collect();
    let y: Vec<f64> = metrics.iter().map(|m| m.ln()).collect();
    let fit = linear_fit(&x, &y);
    Ok(RateFit {
        horizons: horizons.to_vec(),
        metrics: metrics.to_vec(),
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        theoretical,
        deviation: theoretical.map(|t| fit.slope - t),
    })
}

/// Runs the trials at every configured horizon and fits the median metric.
pub fn rate_sweep(
    exp: &Experiment,
    seeds: usize,
    jobs: usize,
) -> Result<(RateFit, Vec<TrialSummary>)> {
    let horizons = exp.config.horizon_grid();
    if horizons.len() < 4 {
        return Err(Error::Config(
            "experiment.horizons: a rate fit needs at least 4 horizons".into(),
        ));
    }
    let trials = horizons
        .iter()
        .map(|&t| run_trials(exp, t, seeds, jobs))
        .collect::<Result<Vec<_>>>()?;
    let medians: Vec<f64> = trials.iter().map(|s| s.median).collect();
    let fit = fit_rate(
        &horizons,
        &medians,
        theoretical_exponent(exp.config.experiment.algorithm, exp.noise.p()),
    )?;
    Ok((fit, trials))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedOutcome {
    pub seed: u64,
    pub clipped: f64,
    pub vanilla: f64,
    pub vanilla_diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub horizon: usize,
    pub seeds: usize,
    pub vanilla_eta: f64,
    pub clipped_median: f64,
    pub vanilla_median: f64,
    pub clipped_upper: f64,
    pub vanilla_upper: f64,
    /// clipped_median / vanilla_median.
    pub ratio: f64,
    /// Seeds on which the clipped final gap is strictly lower.
    pub clipped_wins: usize,
    pub vanilla_diverged: usize,
    pub pairs: Vec<PairedOutcome>,
}

/// Runs the configured clipped method and unclipped SGD on the same seeds
/// and compares final gaps f(x_{T+1}) − f*. The vanilla step size defaults to
/// the clipped schedule's first step size.
pub fn compare_clipped_vanilla(
    exp: &Experiment,
    horizon: usize,
    seeds: usize,
    jobs: usize,
    vanilla_eta: Option<f64>,
) -> Result<CompareReport> {
    let cfg = &exp.config;
    if cfg.experiment.algorithm == Algorithm::VanillaSgd {
        return Err(Error::Config(
            "experiment.algorithm: compare needs a clipped method".into(),
        ));
    }
    let eta = match vanilla_eta.or(cfg.schedule.eta) {
        Some(e) => e,
        None => exp.schedule(horizon)?.params(1).eta,
    };
    let pairs = par_seeds(cfg.experiment.base_seed, seeds, jobs, |seed| {
        let c = run_single(exp, horizon, seed, RunOptions::summary_only())?;
        let mut oracle = Oracle::new(&exp.problem, &exp.noise, seed)?;
        let v = run_vanilla_sgd(
            &mut oracle,
            eta,
            horizon,
            &exp.x1,
            RunOptions::summary_only(),
        )?;
        Ok(PairedOutcome {
            seed,
            clipped: c.final_gap,
            vanilla: v.final_gap,
            vanilla_diverged: v.diverged,
        })
    })?;
    let c: Vec<f64> = pairs.iter().map(|p| p.clipped).collect();
    let v: Vec<f64> = pairs.iter().map(|p| p.vanilla).collect();
    let upper = 1.0 - cfg.experiment.delta;
    let (cm, vm) = (stats::median(&c), stats::median(&v));
    Ok(CompareReport {
        horizon,
        seeds,
        vanilla_eta: eta,
        clipped_median: cm,
        vanilla_median: vm,
        clipped_upper: stats::quantile(&c, upper),
        vanilla_upper: stats::quantile(&v, upper),
        ratio: if cm == vm { 1.0 } else { cm / vm },
        clipped_wins: pairs.iter().filter(|p| p.clipped < p.vanilla).count(),
        vanilla_diverged: pairs.iter().filter(|p| p.vanilla_diverged).count(),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSummary {
    pub runs: usize,
    pub crossed: usize,
    pub frequency: f64,
    /// δ + 3√(δ(1−δ)/runs).
    pub allowed: f64,
    pub max_warnings: usize,
}

impl CrossingSummary {
    pub fn passed(&self) -> bool {
        self.frequency <= self.allowed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub conditions: Option<ConditionReport>,
    pub checks: Vec<CheckRow>,
    pub crossing: Option<CrossingSummary>,
    pub warnings: Vec<String>,
}

impl DiagnoseReport {
    pub fn passed(&self) -> bool {
        self.conditions.as_ref().is_none_or(|c| c.passed())
            && self.checks.iter().all(CheckRow::passed)
            && self.crossing.as_ref().is_none_or(CrossingSummary::passed)
    }
}

fn merge_rows(name: &str, rows: &[CheckRow]) -> CheckRow {
    CheckRow {
        name: name.into(),
        steps: rows.iter().map(|r| r.steps).sum(),
        violations: rows.iter().map(|r| r.violations).sum(),
        max_margin: rows
            .iter()
            .map(|r| r.max_margin)
            .fold(f64::NEG_INFINITY, f64::max),
        stderr: rows.iter().map(|r| r.stderr).fold(0.0, f64::max),
    }
}

/// Runs every enabled diagnostic over `seeds` seeded runs of length `horizon`.
pub fn diagnose(
    exp: &Experiment,
    horizon: usize,
    seeds: usize,
    jobs: usize,
) -> Result<DiagnoseReport> {
    let cfg = &exp.config;
    let d = &cfg.diagnostics;
    let algorithm = cfg.experiment.algorithm;
    let delta = cfg.experiment.delta;
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let schedule = if algorithm == Algorithm::VanillaSgd {
        None
    } else {
        Some(exp.schedule(horizon)?)
    };

    let conditions = match &schedule {
        Some(s) if d.conditions && s.family() != Family::Constant => {
            Some(verify_conditions(s, horizon))
        }
        _ => None,
    };

    if d.mgf {
        let mut r = rng::primary(cfg.experiment.base_seed);
        for law in [
            ScalarLaw::Rademacher { r: 1.0 },
            ScalarLaw::TwoPoint {
                high: 1.0,
                prob: 0.2,
            },
        ] {
            let rep = check_mgf_bound(law, &mgf_lambda_grid(law.radius(), 20), 0, &mut r)?;
            checks.push(rep.summary());
        }
    }

    if d.clip_error {
        if let Some(s) = &schedule {
            let lambda = s.params(1).lambda;
            if lambda.is_finite() {
                let mut r = rng::auxiliary(cfg.experiment.base_seed);
                let rep = check_clip_error_bounds(
                    &exp.problem,
                    &exp.noise,
                    &exp.x1,
                    lambda,
                    d.clip_error_samples,
                    &mut r,
                )?;
                checks.extend(rep.summary_rows());
            } else {
                warnings.push("clip error bounds skipped: schedule does not clip".into());
            }
        }
    }

    let wants_trace = d.martingale
        && matches!(algorithm, Algorithm::Smd | Algorithm::Sgd)
        && schedule
            .as_ref()
            .is_some_and(|s| s.family() != Family::Constant);
    if d.martingale && !wants_trace {
        warnings.push("martingale trace needs a certified smd or sgd schedule; skipped".into());
    }
    if d.pathwise || wants_trace {
        let q = d.martingale_q.unwrap_or(3.0 * exp.inputs.gamma());
        let per_seed = par_seeds(cfg.experiment.base_seed, seeds, jobs, |seed| {
            let rec = run_single(exp, horizon, seed, RunOptions::with_trajectory())?;
            let path = if d.pathwise {
                Some(match algorithm {
                    Algorithm::Smd => check_pathwise_smd(&exp.problem, &rec)?,
                    Algorithm::Asmd => check_pathwise_asmd(&exp.problem, &rec)?,
                    Algorithm::Sgd | Algorithm::VanillaSgd => {
                        check_pathwise_sgd(&exp.problem, &rec)?
                    }
                })
            } else {
                None
            };
            let trace = if wants_trace {
                let mut aux = rng::auxiliary(seed);
                let tr = match algorithm {
                    Algorithm::Smd => martingale_trace_smd(
                        &exp.problem,
                        &exp.noise,
                        &rec,
                        q,
                        delta,
                        d.mc_samples,
                        &mut aux,
                    )?,
                    _ => martingale_trace_sgd(
                        &exp.problem,
                        &exp.noise,
                        &rec,
                        schedule.as_ref().expect("trace implies a schedule"),
                        delta,
                        d.mc_samples,
                        &mut aux,
                    )?,
                };
                Some((tr.crossed, !tr.warnings.is_empty()))
            } else {
                None
            };
            Ok((path, trace))
        })?;
        let rows: Vec<CheckRow> = per_seed
            .iter()
            .filter_map(|(p, _)| p.as_ref().map(|r| r.summary()))
            .collect();
        if !rows.is_empty() {
            let name = rows[0].name.clone();
            checks.push(merge_rows(&name, &rows));
        }
        if wants_trace {
            let crossed = per_seed
                .iter()
                .filter(|(_, t)| t.is_some_and(|t| t.0))
                .count();
            let noisy = per_seed
                .iter()
                .filter(|(_, t)| t.is_some_and(|t| t.1))
                .count();
            if noisy > 0 {
                warnings.push(format!(
                    "{noisy} traces had Monte Carlo stderr above 10% of lambda; raise diagnostics.mc_samples"
                ));
            }
            let frequency = crossed as f64 / seeds as f64;
            checks.push(CheckRow {
                name: "martingale-crossing".into(),
                steps: seeds,
                violations: crossed,
                max_margin: frequency - delta,
                stderr: binomial_stderr(delta, seeds),
            });
            let crossing = CrossingSummary {
                runs: seeds,
                crossed,
                frequency,
                allowed: delta + 3.0 * binomial_stderr(delta, seeds),
                max_warnings: noisy,
            };
            // Individual crossings are allowed; only the frequency is judged.
            checks.last_mut().expect("just pushed").violations = (!crossing.passed()) as usize;
            return Ok(DiagnoseReport {
                conditions,
                checks,
                crossing: Some(crossing),
                warnings,
            });
        }
    }
    Ok(DiagnoseReport {
        conditions,
        checks,
        crossing: None,
        warnings,
    })
}
