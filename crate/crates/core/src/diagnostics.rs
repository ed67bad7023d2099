//! Numerical checks of the analysis: the MGF bound for bounded zero-mean
//! variables, the clipping error bounds, the per-step inequalities of each
//! method, and the supermartingale S_t with its crossing of log(1/δ).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algorithms::{RunRecord, Trajectory};
use crate::clipping::conditional_moments;
use crate::error::{Error, Result};
use crate::linalg::{dot, sub};
use crate::noise::NoiseModel;
use crate::problems::Problem;
use crate::rng::SimRng;
use crate::schedules::{log_weight, Schedule};
use crate::stats;

/// Absolute tolerance of the per-step inequality checks.
pub const PATHWISE_TOL: f64 = 1e-8;
/// Slack, in standard errors, granted to Monte Carlo comparisons.
pub const MC_SLACK: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    NotApplicable,
}

/// One line of a check report: name, steps, violations, worst margin, stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub steps: usize,
    pub violations: usize,
    /// Largest lhs − rhs observed (≤ 0 when every instance holds).
    pub max_margin: f64,
    pub stderr: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// A bounded zero-mean scalar law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum ScalarLaw {
    /// ±r with equal probability.
    Rademacher {
        r: f64,
    },
    /// `high` with probability `prob`, −high·prob/(1−prob) otherwise.
    TwoPoint {
        high: f64,
        prob: f64,
    },
    Zero,
    /// Uniform on [−r, r].
    Uniform {
        r: f64,
    },
    /// N(0, scale²) conditioned on |X| ≤ r.
    ClippedGaussian {
        r: f64,
        scale: f64,
    },
}

impl ScalarLaw {
    /// The almost-sure bound R on |X|.
    pub fn radius(&self) -> f64 {
        match *self {
            ScalarLaw::Rademacher { r } | ScalarLaw::Uniform { r } => r,
            ScalarLaw::ClippedGaussian { r, .. } => r,
            ScalarLaw::TwoPoint { high, prob } => high.abs().max(high.abs() * prob / (1.0 - prob)),
            ScalarLaw::Zero => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScalarLaw::Rademacher { r } | ScalarLaw::Uniform { r } => r > 0.0 && r.is_finite(),
            ScalarLaw::ClippedGaussian { r, scale } => {
                r > 0.0 && r.is_finite() && scale > 0.0 && scale.is_finite()
            }
            ScalarLaw::TwoPoint { high, prob } => high.is_finite() && prob > 0.0 && prob < 1.0,
            ScalarLaw::Zero => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "law",
                format!("invalid parameters: {self:?}"),
            ))
        }
    }

    /// (E e^{λX}, E X²) in closed form for the discrete laws.
    fn exact(&self, lambda: f64) -> Option<(f64, f64)> {
        match *self {
            ScalarLaw::Rademacher { r } => Some(((lambda * r).cosh(), r * r)),
            ScalarLaw::TwoPoint { high, prob } => {
                let low = -high * prob / (1.0 - prob);
                Some((
                    prob * (lambda * high).exp() + (1.0 - prob) * (lambda * low).exp(),
                    high * high * prob / (1.0 - prob),
                ))
            }
            ScalarLaw::Zero => Some((1.0, 0.0)),
            _ => None,
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            ScalarLaw::Rademacher { r } => {
                if rng.random::<bool>() {
                    r
                } else {
                    -r
                }
            }
            ScalarLaw::TwoPoint { high, prob } => {
                if rng.random::<f64>() < prob {
                    high
                } else {
                    -high * prob / (1.0 - prob)
                }
            }
            ScalarLaw::Zero => 0.0,
            ScalarLaw::Uniform { r } => rng.random_range(-r..=r),
            ScalarLaw::ClippedGaussian { r, scale } => loop {
                let v: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
                if v.abs() <= r {
                    break v;
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfRow {
    pub lambda: f64,
    /// E e^{λX}.
    pub lhs: f64,
    /// exp(¾λ²E X²).
    pub rhs: f64,
    pub stderr: f64,
    pub status: Status,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfReport {
    pub law: ScalarLaw,
    pub radius: f64,
    pub exact: bool,
    pub rows: Vec<MgfRow>,
}

impl MgfReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }

    pub fn summary(&self) -> CheckRow {
        let checked: Vec<&MgfRow> = self
            .rows
            .iter()
            .filter(|r| r.status != Status::Skipped)
            .collect();
        CheckRow {
            name: "mgf-bound".into(),
            steps: checked.len(),
            violations: checked.iter().filter(|r| r.status == Status::Fail).count(),
            max_margin: checked
                .iter()
                .map(|r| r.lhs - r.rhs)
                .fold(f64::NEG_INFINITY, f64::max),
            stderr: checked.iter().map(|r| r.stderr).fold(0.0, f64::max),
        }
    }
}

/// `n` equally spaced points covering [0, 1/R].
pub fn mgf_lambda_grid(radius: f64, n: usize) -> Vec<f64> {
    let top = 1.0 / radius;
    match n {
        0 => vec![],
        1 => vec![top],
        _ => (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Checks E e^{λX} ≤ exp(¾λ²E X²) for zero-mean |X| ≤ R and 0 ≤ λ ≤ 1/R.
/// Discrete laws are evaluated exactly; continuous laws by `mc_samples`
/// draws with [`MC_SLACK`] standard errors of slack. λ outside [0, 1/R]
/// is skipped.
pub fn check_mgf_bound(
    law: ScalarLaw,
    lambdas: &[f64],
    mc_samples: usize,
    rng: &mut SimRng,
) -> Result<MgfReport> {
    law.validate()?;
    let radius = law.radius();
    let exact = law.exact(0.0).is_some();
    let draws: Vec<f64> = if exact {
        Vec::new()
    } else {
        if mc_samples < 2 {
            return Err(Error::invalid("mc_samples", "must be >= 2"));
        }
        (0..mc_samples).map(|_| law.sample(rng)).collect()
    };
    let second = if exact {
        0.0
    } else {
        draws.iter().map(|v| v * v).sum::<f64>() / draws.len() as f64
    };
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda >= 0.0) || lambda * radius > 1.0 + 1e-12 {
                return MgfRow {
                    lambda,
                    lhs: f64::NAN,
                    rhs: f64::NAN,
                    stderr: 0.0,
                    status: Status::Skipped,
                    note: Some("lambda outside [0, 1/R]".into()),
                };
            }
            let (lhs, ex2, stderr) = match law.exact(lambda) {
                Some((m, ex2)) => (m, ex2, 0.0),
                None => {
                    let vals: Vec<f64> = draws.iter().map(|v| (lambda * v).exp()).collect();
                    let (m, se) = stats::mean_stderr(&vals);
                    (m, second, se)
                }
            };
            let rhs = (0.75 * lambda * lambda * ex2).exp();
            let ok = lhs <= rhs * (1.0 + 1e-15) + MC_SLACK * stderr;
            MgfRow {
                lambda,
                lhs,
                rhs,
                stderr,
                status: if ok { Status::Pass } else { Status::Fail },
                note: None,
            }
        })
        .collect();
    Ok(MgfReport {
        law,
        radius,
        exact,
        rows,
    })
}

/// Outcome of the clipping error bounds at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipErrorReport {
    pub lambda: f64,
    pub grad_norm: f64,
    pub samples: usize,
    /// Samples with ‖θᵘ‖_* > 2λ.
    pub unbiased_violations: usize,
    pub max_unbiased_norm: f64,
    /// Whether ‖∇f(x)‖_* ≤ λ/2, which the bias and variance bounds require.
    pub precondition: bool,
    pub bias_norm: f64,
    /// 4σ^pλ^{1−p}.
    pub bias_bound: f64,
    pub bias_stderr: f64,
    pub bias_status: Status,
    pub second_moment: f64,
    /// 40σ^pλ^{2−p}.
    pub second_moment_bound: f64,
    pub second_moment_stderr: f64,
    pub second_moment_status: Status,
}

impl ClipErrorReport {
    pub fn passed(&self) -> bool {
        self.unbiased_violations == 0
            && self.bias_status != Status::Fail
            && self.second_moment_status != Status::Fail
    }

    pub fn summary_rows(&self) -> Vec<CheckRow> {
        vec![
            CheckRow {
                name: "unbiased-error-radius".into(),
                steps: self.samples,
                violations: self.unbiased_violations,
                max_margin: self.max_unbiased_norm - 2.0 * self.lambda,
                stderr: 0.0,
            },
            CheckRow {
                name: "bias-bound".into(),
                steps: 1,
                violations: (self.bias_status == Status::Fail) as usize,
                max_margin: self.bias_norm - self.bias_bound,
                stderr: self.bias_stderr,
            },
            CheckRow {
                name: "second-moment-bound".into(),
                steps: 1,
                violations: (self.second_moment_status == Status::Fail) as usize,
                max_margin: self.second_moment - self.second_moment_bound,
                stderr: self.second_moment_stderr,
            },
        ]
    }
}

/// Resamples `m` clipped gradients at `x` and checks ‖θᵘ‖_* ≤ 2λ on every
/// draw, and, when ‖∇f(x)‖_* ≤ λ/2, the bounds ‖θᵇ‖_* ≤ 4σ^pλ^{1−p} and
/// E‖θᵘ‖_*² ≤ 40σ^pλ^{2−p} up to [`MC_SLACK`] standard errors.
pub fn check_clip_error_bounds(
    problem: &Problem,
    noise: &NoiseModel,
    x: &[f64],
    lambda: f64,
    m: usize,
    rng: &mut SimRng,
) -> Result<ClipErrorReport> {
    problem.check_start("x", x)?;
    noise.check_geometry(problem.geometry())?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must be finite and > 0"));
    }
    if m < 2 {
        return Err(Error::invalid("m", "must be >= 2"));
    }
    let grad_norm = problem.geometry().dual_norm(&problem.gradient(x))?;
    let cm = conditional_moments(problem, noise, x, lambda, m, rng);
    let dual = problem.geometry().dual();
    let bias_norm = dual.eval(&cm.bias);
    let (p, sp) = (noise.p(), noise.sigma().powf(noise.p()));
    let bias_bound = 4.0 * sp * lambda.powf(1.0 - p);
    let second_moment_bound = 40.0 * sp * lambda.powf(2.0 - p);
    let precondition = grad_norm <= lambda / 2.0;
    let judge = |value: f64, bound: f64, se: f64| {
        if !precondition {
            Status::NotApplicable
        } else if value <= bound + MC_SLACK * se {
            Status::Pass
        } else {
            Status::Fail
        }
    };
    Ok(ClipErrorReport {
        lambda,
        grad_norm,
        samples: m,
        unbiased_violations: cm.deviations_over_2lambda,
        max_unbiased_norm: cm.max_deviation,
        precondition,
        bias_norm,
        bias_bound,
        bias_stderr: cm.mean_stderr,
        bias_status: judge(bias_norm, bias_bound, cm.mean_stderr),
        second_moment: cm.second_moment,
        second_moment_bound,
        second_moment_stderr: cm.second_moment_stderr,
        second_moment_status: judge(
            cm.second_moment,
            second_moment_bound,
            cm.second_moment_stderr,
        ),
    })
}

/// Per-step outcome of a deterministic inequality along a realized run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwiseReport {
    pub name: String,
    pub steps: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
    /// max_t (lhs_t − rhs_t).
    pub max_margin: f64,
}

impl PathwiseReport {
    fn from_margins(name: &str, margins: impl Iterator<Item = f64>) -> Self {
        let mut r = PathwiseReport {
            name: name.into(),
            steps: 0,
            violations: 0,
            first_violation: None,
            max_margin: f64::NEG_INFINITY,
        };
        for (i, m) in margins.enumerate() {
            r.steps += 1;
            r.max_margin = r.max_margin.max(m);
            if !(m <= PATHWISE_TOL) {
                r.violations += 1;
                r.first_violation.get_or_insert(i + 1);
            }
        }
        r
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn summary(&self) -> CheckRow {
        CheckRow {
            name: self.name.clone(),
            steps: self.steps,
            violations: self.violations,
            max_margin: self.max_margin,
            stderr: 0.0,
        }
    }
}

fn trajectory_of(record: &RunRecord) -> Result<&Trajectory> {
    record
        .trajectory
        .as_ref()
        .ok_or_else(|| Error::Unsupported("the run was recorded without its trajectory".into()))
}

fn minimizer_of(problem: &Problem) -> Result<&[f64]> {
    problem
        .minimizer()
        .ok_or_else(|| Error::Unsupported("the check needs a known minimizer".into()))
}

/// For every step of a mirror descent run:
/// η_tΔ_{t+1} + D(x*, x_{t+1}) − D(x*, x_t) ≤ η_t⟨θ_t, x* − x_t⟩ + η_t²‖θ_t‖_*² + 2G²η_t²,
/// with G the problem's nonsmooth growth constant (0 for smooth objectives).
pub fn check_pathwise_smd(problem: &Problem, record: &RunRecord) -> Result<PathwiseReport> {
    let tr = trajectory_of(record)?;
    let xs = minimizer_of(problem)?;
    let geo = problem.geometry();
    let g = problem.nonsmooth_g();
    let margins = (0..tr.theta.len())
        .map(|i| {
            let (x, next, theta, eta) = (
                &tr.iterates[i],
                &tr.iterates[i + 1],
                &tr.theta[i],
                tr.eta[i],
            );
            let lhs = eta * problem.gap(next) + geo.bregman(xs, next)? - geo.bregman(xs, x)?;
            let tn = geo.dual_norm(theta)?;
            let rhs = eta * dot(theta, &sub(xs, x)) + eta * eta * tn * tn + 2.0 * g * g * eta * eta;
            Ok(lhs - rhs)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PathwiseReport::from_margins(
        "pathwise-smd",
        margins.into_iter(),
    ))
}

/// For every step of an accelerated run:
/// (η/α)(f(y_{t+1}) − f*) + D(x*, z_{t+1}) − D(x*, z_t)
///   ≤ (η(1−α)/α)(f(y_t) − f*) + η⟨θ, x* − z_t⟩ + η²‖θ‖_*²/(2(1 − Lηα)).
pub fn check_pathwise_asmd(problem: &Problem, record: &RunRecord) -> Result<PathwiseReport> {
    let tr = trajectory_of(record)?;
    let xs = minimizer_of(problem)?;
    let geo = problem.geometry();
    let l = problem.smoothness();
    let margins = (0..tr.theta.len())
        .map(|i| {
            let alpha = crate::schedules::asmd_alpha(i + 1);
            let eta = tr.eta[i];
            let (z, z_next) = (&tr.iterates[i], &tr.iterates[i + 1]);
            let (y, y_next) = (&tr.averages[i], &tr.averages[i + 1]);
            let theta = &tr.theta[i];
            let lhs = eta / alpha * problem.gap(y_next) + geo.bregman(xs, z_next)?
                - geo.bregman(xs, z)?;
            let tn = geo.dual_norm(theta)?;
            let rhs = eta * (1.0 - alpha) / alpha * problem.gap(y)
                + eta * dot(theta, &sub(xs, z))
                + eta * eta * tn * tn / (2.0 * (1.0 - l * eta * alpha));
            Ok(lhs - rhs)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PathwiseReport::from_margins(
        "pathwise-asmd",
        margins.into_iter(),
    ))
}

/// For every step of an SGD run:
/// Δ_{t+1} − Δ_t ≤ −(η − Lη²/2)‖∇f(x_t)‖² + (Lη²/2)‖θ‖² + (Lη² − η)⟨∇f(x_t), θ⟩.
pub fn check_pathwise_sgd(problem: &Problem, record: &RunRecord) -> Result<PathwiseReport> {
    let tr = trajectory_of(record)?;
    let l = problem.smoothness();
    let margins = (0..tr.theta.len()).map(|i| {
        let (x, next, theta, eta) = (
            &tr.iterates[i],
            &tr.iterates[i + 1],
            &tr.theta[i],
            tr.eta[i],
        );
        let grad = problem.gradient(x);
        let lhs = problem.value(next) - problem.value(x);
        let rhs = -(eta - l * eta * eta / 2.0) * dot(&grad, &grad)
            + l * eta * eta / 2.0 * dot(theta, theta)
            + (l * eta * eta - eta) * dot(&grad, theta);
        lhs - rhs
    });
    Ok(PathwiseReport::from_margins("pathwise-sgd", margins))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub z: f64,
    pub big_z: f64,
    /// S_t = S_{t−1} + Z_t.
    pub s: f64,
    /// Monte Carlo E[‖θᵘ_t‖_*² | F_{t−1}].
    pub theta_u_second_moment: f64,
    pub theta_b_norm: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTrace {
    pub rows: Vec<TraceRow>,
    /// Q for mirror descent; for SGD the last (P_t, Q_t) pair is in `p_last`/`q_last`.
    pub q: f64,
    pub p_last: Option<f64>,
    pub threshold: f64,
    pub max_s: f64,
    pub crossed: bool,
    pub warnings: Vec<String>,
}

/// Monte Carlo stderr of the conditional mean above this fraction of λ_t
/// triggers a warning.
pub const STDERR_WARN_FRACTION: f64 = 0.1;

fn finish_trace(
    rows: Vec<TraceRow>,
    q: f64,
    p_last: Option<f64>,
    delta: f64,
    lambdas: &[f64],
) -> MartingaleTrace {
    let threshold = (1.0 / delta).ln();
    let max_s = rows.iter().map(|r| r.s).fold(f64::NEG_INFINITY, f64::max);
    let noisy = rows
        .iter()
        .zip(lambdas)
        .filter(|(r, l)| r.mc_stderr > STDERR_WARN_FRACTION * *l)
        .count();
    let warnings = if noisy > 0 {
        vec![format!(
            "{noisy} steps have Monte Carlo stderr above {STDERR_WARN_FRACTION} of lambda; increase the resample count"
        )]
    } else {
        Vec::new()
    };
    MartingaleTrace {
        crossed: max_s >= threshold,
        rows,
        q,
        p_last,
        threshold,
        max_s,
        warnings,
    }
}

fn check_trace_inputs(delta: f64, m: usize) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1)"));
    }
    if m < 2 {
        return Err(Error::invalid("m", "must be >= 2"));
    }
    Ok(())
}

/// The mirror descent supermartingale:
/// z_t = 1/(2η_tλ_t max_{i≤t}√(2D(x*, x_i)) + 16Qη_t²λ_t²),
/// Z_t = z_t(η_tΔ_{t+1} + D(x*, x_{t+1}) − D(x*, x_t) − η_t⟨x* − x_t, θᵇ_t⟩
///        − 2η_t²‖θᵇ_t‖_*² − 2η_t²E‖θᵘ_t‖_*²) − (3/(8λ_t²) + 24z_t²η_t⁴λ_t²)E‖θᵘ_t‖_*²,
/// S_t = Σ_{i≤t} Z_i. Conditional moments are estimated from `m` resamples
/// per step drawn from `aux` at the recorded iterate.
pub fn martingale_trace_smd(
    problem: &Problem,
    noise: &NoiseModel,
    record: &RunRecord,
    q: f64,
    delta: f64,
    m: usize,
    aux: &mut SimRng,
) -> Result<MartingaleTrace> {
    check_trace_inputs(delta, m)?;
    if !(q >= 1.0) {
        return Err(Error::invalid("q", "must be >= 1"));
    }
    let tr = trajectory_of(record)?;
    let xs = minimizer_of(problem)?;
    let geo = problem.geometry();
    let mut rows = Vec::with_capacity(tr.theta.len());
    let mut max_r: f64 = 0.0;
    let mut s = 0.0;
    for i in 0..tr.theta.len() {
        let (x, next) = (&tr.iterates[i], &tr.iterates[i + 1]);
        let (eta, lambda) = (tr.eta[i], tr.lambda[i]);
        let d_now = geo.bregman(xs, x)?;
        max_r = max_r.max((2.0 * d_now).sqrt());
        let z = 1.0 / (2.0 * eta * lambda * max_r + 16.0 * q * eta * eta * lambda * lambda);
        let cm = conditional_moments(problem, noise, x, lambda, m, aux);
        let bn = geo.dual_norm(&cm.bias)?;
        let u2 = cm.second_moment;
        let inner = eta * problem.gap(next) + geo.bregman(xs, next)?
            - d_now
            - eta * dot(&sub(xs, x), &cm.bias)
            - 2.0 * eta * eta * bn * bn
            - 2.0 * eta * eta * u2;
        let big_z = z * inner
            - (3.0 / (8.0 * lambda * lambda) + 24.0 * z * z * eta.powi(4) * lambda * lambda) * u2;
        s += big_z;
        rows.push(TraceRow {
            t: i + 1,
            z,
            big_z,
            s,
            theta_u_second_moment: u2,
            theta_b_norm: bn,
            mc_stderr: cm.mean_stderr,
        });
    }
    Ok(finish_trace(rows, q, None, delta, &tr.lambda))
}

/// The SGD supermartingale:
/// z_t = 1/(2P_tη_tλ_t max_{i≤t}√(2LΔ_i) + 8Q_tLη_t²λ_t²),
/// Z_t = z_t(η_t/2‖∇f(x_t)‖² + Δ_{t+1} − Δ_t − (3η_t/2)‖θᵇ_t‖² − Lη_t²E‖θᵘ_t‖²)
///        − (3z_t²Lη_t²Δ_t + 6L²z_t²η_t⁴λ_t²)E‖θᵘ_t‖²,
/// with P_t = C₁/(λ_tη_t√(2L)) and Q_t = C₁²√A/(2Lη_t²λ_t²) from the
/// schedule's certifying constants.
pub fn martingale_trace_sgd(
    problem: &Problem,
    noise: &NoiseModel,
    record: &RunRecord,
    schedule: &Schedule,
    delta: f64,
    m: usize,
    aux: &mut SimRng,
) -> Result<MartingaleTrace> {
    check_trace_inputs(delta, m)?;
    let k = schedule
        .proof_constants()
        .filter(|_| schedule.family() == crate::schedules::Family::Sgd)
        .ok_or_else(|| Error::Unsupported("the SGD trace needs a certified SGD schedule".into()))?;
    let tr = trajectory_of(record)?;
    let l = problem.smoothness();
    let mut rows = Vec::with_capacity(tr.theta.len());
    let mut max_r: f64 = 0.0;
    let mut s = 0.0;
    let (mut p_t, mut q_t) = (1.0, 1.0);
    for i in 0..tr.theta.len() {
        let (x, next) = (&tr.iterates[i], &tr.iterates[i + 1]);
        let (eta, lambda) = (tr.eta[i], tr.lambda[i]);
        let gap = problem.gap(x);
        max_r = max_r.max((2.0 * l * gap).sqrt());
        p_t = k.c1 / (lambda * eta * (2.0 * l).sqrt());
        q_t = k.c1 * k.c1 * k.a.sqrt() / (2.0 * l * eta * eta * lambda * lambda);
        let z =
            1.0 / (2.0 * p_t * eta * lambda * max_r + 8.0 * q_t * l * eta * eta * lambda * lambda);
        let cm = conditional_moments(problem, noise, x, lambda, m, aux);
        let bn2 = dot(&cm.bias, &cm.bias);
        let u2 = cm.second_moment;
        let grad = problem.gradient(x);
        let inner = eta / 2.0 * dot(&grad, &grad) + problem.gap(next)
            - gap
            - 1.5 * eta * bn2
            - l * eta * eta * u2;
        let big_z = z * inner
            - (3.0 * z * z * l * eta * eta * gap
                + 6.0 * l * l * z * z * eta.powi(4) * lambda * lambda)
                * u2;
        s += big_z;
        rows.push(TraceRow {
            t: i + 1,
            z,
            big_z,
            s,
            theta_u_second_moment: u2,
            theta_b_norm: bn2.sqrt(),
            mc_stderr: cm.mean_stderr,
        });
    }
    Ok(finish_trace(rows, q_t, Some(p_t), delta, &tr.lambda))
}

/// Σ_{t=1}^{upper} 1/(2t(1 + log t)²).
pub fn anytime_weight_sum(upper: usize) -> f64 {
    (1..=upper).map(|t| 1.0 / (2.0 * log_weight(t))).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSumReport {
    pub upper: usize,
    pub partial_sum: f64,
    pub below_one: bool,
}

pub fn check_anytime_weight_sum(upper: usize) -> Result<WeightSumReport> {
    if upper == 0 {
        return Err(Error::invalid("upper", "must be >= 1"));
    }
    let partial_sum = anytime_weight_sum(upper);
    Ok(WeightSumReport {
        upper,
        partial_sum,
        below_one: partial_sum < 1.0,
    })
}
