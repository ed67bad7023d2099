//! Clipped stochastic mirror descent, its accelerated three-sequence variant,
//! clipped SGD, and an unclipped SGD baseline.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clipping::clip_in_place;
use crate::error::{Error, Result};
use crate::linalg::lincomb;
use crate::noise::Oracle;
use crate::schedules::{asmd_alpha, Family, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Smd,
    Asmd,
    Sgd,
    VanillaSgd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Smd => "smd",
            Algorithm::Asmd => "asmd",
            Algorithm::Sgd => "sgd",
            Algorithm::VanillaSgd => "vanilla-sgd",
        }
    }

    fn family(self) -> Family {
        match self {
            Algorithm::Smd => Family::Smd,
            Algorithm::Asmd => Family::Asmd,
            Algorithm::Sgd | Algorithm::VanillaSgd => Family::Sgd,
        }
    }
}

/// Iterates beyond this magnitude mark a vanilla run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// One iteration of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: usize,
    pub eta: f64,
    pub lambda: f64,
    pub clipped: bool,
    /// ‖∇̂f(x_t)‖_* before clipping.
    pub raw_grad_norm: f64,
    /// SMD: Δ_{t+1}. ASMD: f(y_{t+1}) − f*. SGD: ‖∇f(x_t)‖².
    pub metric: f64,
}

/// The full iterate history of a run, kept for the per-step diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// Gradient query points x_1..x_T.
    pub queries: Vec<Vec<f64>>,
    /// Realized θ_t = clip(∇̂f(x_t), λ_t) − ∇f(x_t).
    pub theta: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub lambda: Vec<f64>,
    /// SMD/SGD: x_1..x_{T+1}. ASMD: z_1..z_{T+1}.
    pub iterates: Vec<Vec<f64>>,
    /// ASMD only: y_1..y_{T+1}.
    pub averages: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub horizon: usize,
    pub rows: Vec<StepRow>,
    /// SMD: (1/T)Σ_{t=2}^{T+1} Δ_t. ASMD: f(y_{T+1}) − f*. SGD: (1/T)Σ_{t=1}^T ‖∇f(x_t)‖².
    pub summary: f64,
    /// SMD/SGD: x_{T+1}. ASMD: y_{T+1}.
    pub final_iterate: Vec<f64>,
    /// f(final_iterate) − f*.
    pub final_gap: f64,
    pub clipped_steps: usize,
    pub diverged: bool,
    pub wall_time: Duration,
    pub trajectory: Option<Trajectory>,
}

impl RunRecord {
    pub fn clipped_fraction(&self) -> f64 {
        self.clipped_steps as f64 / self.horizon.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub rows: bool,
    pub trajectory: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            rows: true,
            trajectory: false,
        }
    }
}

impl RunOptions {
    pub fn with_trajectory() -> Self {
        RunOptions {
            rows: true,
            trajectory: true,
        }
    }

    pub fn summary_only() -> Self {
        RunOptions {
            rows: false,
            trajectory: false,
        }
    }
}

fn check_schedule(schedule: &Schedule, algorithm: Algorithm) -> Result<()> {
    let family = schedule.family();
    if family == Family::Constant || family == algorithm.family() {
        Ok(())
    } else {
        Err(Error::ScheduleMismatch {
            mode: schedule.mode().name(),
            algorithm: algorithm.name(),
        })
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        Err(Error::invalid("horizon", "must be >= 1"))
    } else {
        Ok(())
    }
}

struct Recorder {
    opts: RunOptions,
    rows: Vec<StepRow>,
    trajectory: Trajectory,
    clipped_steps: usize,
}

impl Recorder {
    fn new(opts: RunOptions, horizon: usize) -> Self {
        Recorder {
            opts,
            rows: Vec::with_capacity(if opts.rows { horizon } else { 0 }),
            trajectory: Trajectory::default(),
            clipped_steps: 0,
        }
    }

    fn row(&mut self, row: StepRow) {
        self.clipped_steps += row.clipped as usize;
        if self.opts.rows {
            self.rows.push(row);
        }
    }

    fn step(&mut self, query: &[f64], clipped: &[f64], grad: &[f64], eta: f64, lambda: f64) {
        if self.opts.trajectory {
            let tr = &mut self.trajectory;
            tr.queries.push(query.to_vec());
            tr.theta
                .push(clipped.iter().zip(grad).map(|(a, b)| a - b).collect());
            tr.eta.push(eta);
            tr.lambda.push(lambda);
        }
    }

    fn iterate(&mut self, x: &[f64]) {
        if self.opts.trajectory {
            self.trajectory.iterates.push(x.to_vec());
        }
    }

    fn average(&mut self, y: &[f64]) {
        if self.opts.trajectory {
            self.trajectory.averages.push(y.to_vec());
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        self,
        algorithm: Algorithm,
        seed: u64,
        horizon: usize,
        summary: f64,
        final_iterate: Vec<f64>,
        final_gap: f64,
        diverged: bool,
        start: Instant,
    ) -> RunRecord {
        RunRecord {
            algorithm,
            seed,
            horizon,
            rows: self.rows,
            summary,
            final_iterate,
            final_gap,
            clipped_steps: self.clipped_steps,
            diverged,
            wall_time: start.elapsed(),
            trajectory: self.opts.trajectory.then_some(self.trajectory),
        }
    }
}

/// Clipped stochastic mirror descent:
/// x_{t+1} = argmin_x { η_t⟨clip(∇̂f(x_t), λ_t), x⟩ + D_ψ(x, x_t) }.
pub fn run_smd(
    oracle: &mut Oracle<'_>,
    schedule: &mut Schedule,
    horizon: usize,
    x1: &[f64],
    opts: RunOptions,
) -> Result<RunRecord> {
    check_schedule(schedule, Algorithm::Smd)?;
    check_horizon(horizon)?;
    let problem = oracle.problem();
    problem.check_start("x1", x1)?;
    let geometry = problem.geometry();
    let dual = geometry.dual();
    let start = Instant::now();
    schedule.reset();
    let mut rec = Recorder::new(opts, horizon);
    let mut x = x1.to_vec();
    let mut g = vec![0.0; x.len()];
    let mut grad = vec![0.0; x.len()];
    let mut total = 0.0;
    rec.iterate(&x);
    for t in 1..=horizon {
        schedule.observe(t, &x, geometry)?;
        let sp = schedule.params(t);
        oracle.stochastic_grad_into(&x, &mut g);
        let raw = dual.eval(&g);
        let clipped = clip_in_place(&mut g, sp.lambda, dual);
        if opts.trajectory {
            problem.gradient_into(&x, &mut grad);
        }
        rec.step(&x, &g, &grad, sp.eta, sp.lambda);
        x = geometry.mirror_step(&x, &g, sp.eta)?;
        debug_assert!(geometry.contains(&x, crate::geometry::DOMAIN_TOL));
        rec.iterate(&x);
        let gap = problem.gap(&x);
        total += gap;
        rec.row(StepRow {
            t,
            eta: sp.eta,
            lambda: sp.lambda,
            clipped,
            raw_grad_norm: raw,
            metric: gap,
        });
    }
    let final_gap = problem.gap(&x);
    Ok(rec.finish(
        Algorithm::Smd,
        oracle.seed(),
        horizon,
        total / horizon as f64,
        x,
        final_gap,
        false,
        start,
    ))
}

/// Clipped accelerated stochastic mirror descent with α_t = 2/(t+1):
/// x_t = (1−α_t)y_t + α_t z_t, a mirror step from z_t with the clipped
/// gradient at x_t, then y_{t+1} = (1−α_t)y_t + α_t z_{t+1}. Starts from y₁ = z₁.
pub fn run_asmd(
    oracle: &mut Oracle<'_>,
    schedule: &mut Schedule,
    horizon: usize,
    y1: &[f64],
    opts: RunOptions,
) -> Result<RunRecord> {
    check_schedule(schedule, Algorithm::Asmd)?;
    check_horizon(horizon)?;
    let problem = oracle.problem();
    problem.check_start("y1", y1)?;
    let geometry = problem.geometry();
    let dual = geometry.dual();
    let start = Instant::now();
    schedule.reset();
    let mut rec = Recorder::new(opts, horizon);
    let mut y = y1.to_vec();
    let mut z = y1.to_vec();
    let mut g = vec![0.0; y.len()];
    let mut grad = vec![0.0; y.len()];
    rec.iterate(&z);
    rec.average(&y);
    for t in 1..=horizon {
        let alpha = asmd_alpha(t);
        let sp = schedule.params(t);
        let x = lincomb(1.0 - alpha, &y, alpha, &z);
        oracle.stochastic_grad_into(&x, &mut g);
        let raw = dual.eval(&g);
        let clipped = clip_in_place(&mut g, sp.lambda, dual);
        if opts.trajectory {
            problem.gradient_into(&x, &mut grad);
        }
        rec.step(&x, &g, &grad, sp.eta, sp.lambda);
        z = geometry.mirror_step(&z, &g, sp.eta)?;
        y = lincomb(1.0 - alpha, &y, alpha, &z);
        rec.iterate(&z);
        rec.average(&y);
        rec.row(StepRow {
            t,
            eta: sp.eta,
            lambda: sp.lambda,
            clipped,
            raw_grad_norm: raw,
            metric: problem.gap(&y),
        });
    }
    let final_gap = problem.gap(&y);
    Ok(rec.finish(
        Algorithm::Asmd,
        oracle.seed(),
        horizon,
        final_gap,
        y,
        final_gap,
        false,
        start,
    ))
}

fn sgd_loop(
    oracle: &mut Oracle<'_>,
    mut params: impl FnMut(usize) -> (f64, f64),
    algorithm: Algorithm,
    horizon: usize,
    x1: &[f64],
    opts: RunOptions,
) -> Result<RunRecord> {
    check_horizon(horizon)?;
    let problem = oracle.problem();
    if !problem.geometry().is_unconstrained_euclidean() {
        return Err(Error::Unsupported(format!(
            "{} requires the unconstrained Euclidean geometry",
            algorithm.name()
        )));
    }
    problem.check_start("x1", x1)?;
    let dual = problem.geometry().dual();
    let start = Instant::now();
    let mut rec = Recorder::new(opts, horizon);
    let mut x = x1.to_vec();
    let mut g = vec![0.0; x.len()];
    let mut grad = vec![0.0; x.len()];
    let mut total = 0.0;
    let mut diverged = false;
    rec.iterate(&x);
    for t in 1..=horizon {
        let (eta, lambda) = params(t);
        problem.gradient_into(&x, &mut grad);
        let grad_sq: f64 = grad.iter().map(|v| v * v).sum();
        total += grad_sq;
        oracle.stochastic_grad_into(&x, &mut g);
        let raw = dual.eval(&g);
        let clipped = lambda.is_finite() && clip_in_place(&mut g, lambda, dual);
        rec.step(&x, &g, &grad, eta, lambda);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= eta * gi;
        }
        rec.iterate(&x);
        rec.row(StepRow {
            t,
            eta,
            lambda,
            clipped,
            raw_grad_norm: raw,
            metric: grad_sq,
        });
        if x.iter().any(|v| !(v.abs() <= DIVERGENCE_THRESHOLD)) {
            diverged = true;
            break;
        }
    }
    let (summary, final_gap) = if diverged {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (total / horizon as f64, problem.gap(&x))
    };
    Ok(rec.finish(
        algorithm,
        oracle.seed(),
        horizon,
        summary,
        x,
        final_gap,
        diverged,
        start,
    ))
}

/// Clipped SGD: x_{t+1} = x_t − η_t clip(∇̂f(x_t), λ_t). Unconstrained ℓ2 only.
pub fn run_sgd(
    oracle: &mut Oracle<'_>,
    schedule: &Schedule,
    horizon: usize,
    x1: &[f64],
    opts: RunOptions,
) -> Result<RunRecord> {
    check_schedule(schedule, Algorithm::Sgd)?;
    sgd_loop(
        oracle,
        |t| {
            let sp = schedule.params(t);
            (sp.eta, sp.lambda)
        },
        Algorithm::Sgd,
        horizon,
        x1,
        opts,
    )
}

/// SGD without clipping at a constant step. Stops early and flags divergence
/// once an iterate is non-finite or exceeds [`DIVERGENCE_THRESHOLD`] in magnitude.
pub fn run_vanilla_sgd(
    oracle: &mut Oracle<'_>,
    eta: f64,
    horizon: usize,
    x1: &[f64],
    opts: RunOptions,
) -> Result<RunRecord> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", "must be finite and > 0"));
    }
    sgd_loop(
        oracle,
        |_| (eta, f64::INFINITY),
        Algorithm::VanillaSgd,
        horizon,
        x1,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use crate::problems::Problem;
    use crate::schedules::{ScheduleInputs, ScheduleMode};
    use approx::assert_abs_diff_eq;

    fn quad2() -> Problem {
        Problem::quadratic(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap()
    }

    fn exact() -> NoiseModel {
        NoiseModel::two_point(2.0, 0.0, 0.5).unwrap()
    }

    #[test]
    fn smd_deterministic_geometric_decay() {
        let p = quad2();
        let n = exact();
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let mut s = Schedule::constant(0.25, 1e9).unwrap();
        let r = run_smd(&mut o, &mut s, 20, &[1.0, 0.0], RunOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 20);
        let mut gap = 0.5;
        for row in &r.rows {
            gap *= 0.75 * 0.75;
            assert_abs_diff_eq!(row.metric, gap, epsilon = 1e-15);
            assert!(!row.clipped);
        }
        assert_eq!(r.clipped_steps, 0);
    }

    #[test]
    fn smd_single_step_summary_is_next_gap() {
        let p = quad2();
        let n = exact();
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let mut s = Schedule::constant(0.25, 1e9).unwrap();
        let r = run_smd(&mut o, &mut s, 1, &[1.0, 0.0], RunOptions::default()).unwrap();
        assert_eq!(r.summary, r.rows[0].metric);
        assert_abs_diff_eq!(r.summary, 0.5 * 0.5625, epsilon = 1e-15);
    }

    #[test]
    fn smd_noise_free_respects_deterministic_bound() {
        let p = quad2();
        let n = exact();
        for horizon in [1usize, 10, 100, 1000] {
            let mut i = ScheduleInputs::new(2.0, 0.0, 1.0, 0.1);
            i.r1 = 1.0;
            i.horizon = Some(horizon);
            let mut s = Schedule::smd_known_t(i.clone()).unwrap();
            let mut o = Oracle::new(&p, &n, 3).unwrap();
            let r = run_smd(&mut o, &mut s, horizon, &[1.0, 0.0], RunOptions::default()).unwrap();
            let bound = 48.0 * 1.0 * i.smd_deterministic_branch() * i.gamma() / horizon as f64;
            assert!(r.summary <= bound, "{} > {}", r.summary, bound);
            assert_abs_diff_eq!(
                s.rate_bound(horizon).unwrap(),
                bound,
                epsilon = 1e-12 * bound
            );
        }
    }

    #[test]
    fn schedule_family_is_enforced() {
        let p = quad2();
        let n = exact();
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let mut i = ScheduleInputs::new(2.0, 0.0, 1.0, 0.1);
        i.delta1 = 0.5;
        i.horizon = Some(4);
        let mut s = Schedule::new(ScheduleMode::SgdKnownT, i).unwrap();
        assert!(matches!(
            run_smd(&mut o, &mut s, 4, &[1.0, 0.0], RunOptions::default()),
            Err(Error::ScheduleMismatch { .. })
        ));
    }

    #[test]
    fn asmd_first_step_collapses_sequences() {
        let p = quad2();
        let n = exact();
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let mut s = Schedule::constant(0.1, 1e9).unwrap();
        let r = run_asmd(
            &mut o,
            &mut s,
            1,
            &[1.0, 0.5],
            RunOptions::with_trajectory(),
        )
        .unwrap();
        let tr = r.trajectory.unwrap();
        assert_eq!(tr.queries[0], vec![1.0, 0.5]);
        assert_eq!(tr.averages[1], tr.iterates[1]);
        assert_eq!(r.final_iterate, tr.iterates[1]);
    }

    #[test]
    fn asmd_stays_on_simplex() {
        let p = Problem::simplex_quadratic(vec![0.7, 0.2, 0.1]).unwrap();
        let n = NoiseModel::two_point(1.5, 0.5, 0.1).unwrap();
        let mut i = ScheduleInputs::new(1.5, 0.5, 1.0, 0.1);
        let x1 = [1.0 / 3.0; 3];
        i.r1 = (2.0 * p.geometry().bregman(p.minimizer().unwrap(), &x1).unwrap()).sqrt();
        i.horizon = Some(200);
        i.scaled_c = Some(10.0);
        let mut s = Schedule::asmd_known_t(i).unwrap();
        let mut o = Oracle::new(&p, &n, 9).unwrap();
        let r = run_asmd(&mut o, &mut s, 200, &x1, RunOptions::with_trajectory()).unwrap();
        let tr = r.trajectory.unwrap();
        let g = p.geometry();
        for v in tr.queries.iter().chain(&tr.iterates).chain(&tr.averages) {
            assert!(g.contains(v, 1e-9));
            assert!(v.iter().all(|&c| c > 0.0));
        }
    }

    #[test]
    fn sgd_exact_step_on_quadratic() {
        let p = quad2();
        let n = exact();
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let s = Schedule::constant(1.0, f64::INFINITY).unwrap();
        let r = run_sgd(&mut o, &s, 1, &[3.0, -4.0], RunOptions::default()).unwrap();
        assert_eq!(r.final_iterate, vec![0.0, 0.0]);
        assert_eq!(r.summary, 25.0);
    }

    #[test]
    fn sgd_deterministic_descent_on_nonconvex() {
        let p = Problem::nonconvex_ratio(1).unwrap();
        let n = exact();
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let s = Schedule::constant(0.4, f64::INFINITY).unwrap();
        let r = run_sgd(&mut o, &s, 50, &[1.0], RunOptions::with_trajectory()).unwrap();
        let xs = r.trajectory.unwrap().iterates;
        for w in xs.windows(2) {
            assert!(p.value(&w[1]) < p.value(&w[0]));
        }
        // The gradient norm peaks at x = 1/√3, so it only decreases past that point.
        let first = xs.iter().position(|x| x[0] < 1.0 / 3f64.sqrt()).unwrap();
        assert!(first > 0);
        for w in r.rows[first..].windows(2) {
            assert!(w[1].metric < w[0].metric);
        }
    }

    #[test]
    fn vanilla_matches_unclipped_sgd_without_noise() {
        let p = Problem::nonconvex_ratio(3).unwrap();
        let n = exact();
        let x1 = [0.3, -0.2, 1.5];
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let s = Schedule::constant(0.2, f64::INFINITY).unwrap();
        let a = run_sgd(&mut o, &s, 100, &x1, RunOptions::default()).unwrap();
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let b = run_vanilla_sgd(&mut o, 0.2, 100, &x1, RunOptions::default()).unwrap();
        assert_eq!(a.final_iterate, b.final_iterate);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn vanilla_flags_divergence() {
        let p = quad2();
        let n = exact();
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let r = run_vanilla_sgd(&mut o, 3.0, 100, &[1.0, 0.0], RunOptions::default()).unwrap();
        assert!(r.diverged);
        assert!(r.rows.len() < 100);
        assert!(r.final_iterate[0].abs() > DIVERGENCE_THRESHOLD);
        assert_eq!(r.summary, f64::INFINITY);
    }

    #[test]
    fn sgd_rejects_simplex() {
        let p = Problem::simplex_quadratic(vec![0.5, 0.5]).unwrap();
        let n = exact();
        let mut o = Oracle::new(&p, &n, 1).unwrap();
        let s = Schedule::constant(0.2, 1.0).unwrap();
        assert!(matches!(
            run_sgd(&mut o, &s, 3, &[0.5, 0.5], RunOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn runs_are_reproducible() {
        let p = Problem::quadratic(vec![1.0, 2.0], vec![0.1, -0.3]).unwrap();
        let n = NoiseModel::two_point(1.5, 1.0, 0.01).unwrap();
        let run = || {
            let mut o = Oracle::new(&p, &n, 77).unwrap();
            let mut s = Schedule::constant(0.05, 2.0).unwrap();
            run_smd(&mut o, &mut s, 300, &[1.0, 1.0], RunOptions::default()).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.final_iterate, b.final_iterate);
        assert!(a.clipped_steps > 0);
    }

    #[test]
    fn param_free_schedule_drives_smd() {
        let p = Problem::quadratic(vec![1.0; 2], vec![0.0; 2]).unwrap();
        let n = NoiseModel::two_point(2.0, 1.0, 0.1).unwrap();
        let mut i = ScheduleInputs::new(2.0, 1.0, 1.0, 0.1);
        i.grad1_bound = 1.0;
        let mut s = Schedule::smd_param_free(i).unwrap();
        let mut o = Oracle::new(&p, &n, 5).unwrap();
        let r = run_smd(&mut o, &mut s, 100, &[1.0, 0.0], RunOptions::default()).unwrap();
        assert!(r.summary.is_finite());
    }
}
