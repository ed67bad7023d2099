//! Step-size and clipping-level schedules (η_t, λ_t) for the three clipped
//! methods, the constants that certify them, and a numeric checker for the
//! conditions those constants must satisfy.
//!
//! Logarithms are natural. Anytime variants replace the horizon T by
//! 2t(1+log t)² (for the SMD/ASMD noise branch this reads 52t(1+log t)²/γ in
//! place of 26T/γ).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    SmdKnownT,
    SmdAnytime,
    SmdParamFree,
    AsmdKnownT,
    AsmdAnytime,
    SgdKnownT,
    SgdAnytime,
    /// Fixed (η, λ) for every step. Not one of the certified schedules.
    Constant,
}

impl ScheduleMode {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleMode::SmdKnownT => "smd-known-t",
            ScheduleMode::SmdAnytime => "smd-anytime",
            ScheduleMode::SmdParamFree => "smd-param-free",
            ScheduleMode::AsmdKnownT => "asmd-known-t",
            ScheduleMode::AsmdAnytime => "asmd-anytime",
            ScheduleMode::SgdKnownT => "sgd-known-t",
            ScheduleMode::SgdAnytime => "sgd-anytime",
            ScheduleMode::Constant => "constant",
        }
    }

    pub fn family(self) -> Family {
        match self {
            ScheduleMode::SmdKnownT | ScheduleMode::SmdAnytime | ScheduleMode::SmdParamFree => {
                Family::Smd
            }
            ScheduleMode::AsmdKnownT | ScheduleMode::AsmdAnytime => Family::Asmd,
            ScheduleMode::SgdKnownT | ScheduleMode::SgdAnytime => Family::Sgd,
            ScheduleMode::Constant => Family::Constant,
        }
    }

    pub fn needs_horizon(self) -> bool {
        matches!(
            self,
            ScheduleMode::SmdKnownT | ScheduleMode::AsmdKnownT | ScheduleMode::SgdKnownT
        )
    }
}

/// The algorithm family a schedule is certified for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Smd,
    Asmd,
    Sgd,
    Constant,
}

/// Problem and confidence constants a schedule is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInputs {
    pub p: f64,
    pub sigma: f64,
    /// Smoothness constant L.
    pub smoothness: f64,
    /// Failure probability δ.
    pub delta: f64,
    /// √(2 D_ψ(x*, x₁)).
    pub r1: f64,
    /// √(2 D_ψ(x*, x₀)).
    pub r0: f64,
    pub mu: f64,
    /// ‖g₀‖_*.
    pub g0_norm: f64,
    pub horizon: Option<usize>,
    /// Replaces the 10⁴ floor of the accelerated constant c; the result is no longer a certified schedule.
    pub scaled_c: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    /// ∇₁ ≥ ‖∇f(x₁)‖_*.
    pub grad1_bound: f64,
    /// Δ₁ = f(x₁) − f*.
    pub delta1: f64,
}

/// The floor of the accelerated constant c.
pub const ASMD_C_FLOOR: f64 = 1e4;

impl ScheduleInputs {
    /// Inputs with every optional constant at its neutral default
    /// (R₀ = μ = ‖g₀‖ = 0, c₁ = c₂ = 1, no horizon).
    pub fn new(p: f64, sigma: f64, smoothness: f64, delta: f64) -> Self {
        ScheduleInputs {
            p,
            sigma,
            smoothness,
            delta,
            r1: 0.0,
            r0: 0.0,
            mu: 0.0,
            g0_norm: 0.0,
            horizon: None,
            scaled_c: None,
            c1: 1.0,
            c2: 1.0,
            grad1_bound: 0.0,
            delta1: 0.0,
        }
    }

    /// γ = max{log(1/δ), 1}.
    pub fn gamma(&self) -> f64 {
        (1.0 / self.delta).ln().max(1.0)
    }

    fn sigma_p(&self) -> f64 {
        self.sigma.powf(self.p)
    }

    /// The deterministic branch 2(2LR₁ + LR₀ + μσ + ‖g₀‖_*) of the SMD clipping level.
    pub fn smd_deterministic_branch(&self) -> f64 {
        let l = self.smoothness;
        2.0 * (2.0 * l * self.r1 + l * self.r0 + self.mu * self.sigma + self.g0_norm)
    }

    /// λ of the known-horizon SMD schedule, evaluated at a real-valued horizon.
    pub fn smd_lambda(&self, horizon: f64) -> f64 {
        let noise = (26.0 * horizon / self.gamma()).powf(1.0 / self.p) * self.sigma;
        noise.max(self.smd_deterministic_branch())
    }

    /// The accelerated constant c at a real-valued horizon.
    pub fn asmd_c(&self, horizon: f64) -> f64 {
        let gamma = self.gamma();
        let noise =
            4.0 * (horizon + 1.0) * (26.0 * horizon / gamma).powf(1.0 / self.p) * self.sigma
                / (gamma * self.smoothness * self.r1);
        noise.max(self.scaled_c.unwrap_or(ASMD_C_FLOOR))
    }

    /// The three λ branches of the known-horizon SGD schedule at a real-valued horizon.
    pub fn sgd_lambda_branches(&self, horizon: f64) -> [f64; 3] {
        let p = self.p;
        let l = self.smoothness;
        let gamma = self.gamma();
        let th = horizon.powf(1.0 / (3.0 * p - 2.0));
        [
            (8.0 * gamma / (l * self.delta1).sqrt()).powf(1.0 / (p - 1.0))
                * th
                * self.sigma.powf(p / (p - 1.0)),
            2.0 * (90.0 * l * self.delta1).sqrt(),
            32f64.powf(1.0 / p) * self.sigma * th,
        ]
    }

    /// (η, λ) of the known-horizon SGD schedule at a real-valued horizon.
    pub fn sgd_params(&self, horizon: f64) -> StepParams {
        let lambda = self
            .sgd_lambda_branches(horizon)
            .into_iter()
            .fold(0.0, f64::max);
        let p = self.p;
        let eta = self.delta1.sqrt() * horizon.powf((1.0 - p) / (3.0 * p - 2.0))
            / (8.0 * lambda * self.smoothness.sqrt() * self.gamma());
        StepParams { eta, lambda }
    }
}

/// t(1 + log t)², the anytime horizon weight.
pub fn log_weight(t: usize) -> f64 {
    let t = t as f64;
    let l = 1.0 + t.ln();
    t * l * l
}

/// α_t = 2/(t+1).
pub fn asmd_alpha(t: usize) -> f64 {
    2.0 / (t as f64 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub eta: f64,
    pub lambda: f64,
}

/// Constants C₁, C₂, C₃, A certifying a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct TrajectoryState {
    last_t: usize,
    x1: Option<Vec<f64>>,
    max_dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    mode: ScheduleMode,
    inputs: ScheduleInputs,
    constant: Option<StepParams>,
    step_scale: f64,
    state: TrajectoryState,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and >= 0, got {v}"),
        ))
    }
}

impl Schedule {
    pub fn new(mode: ScheduleMode, inputs: ScheduleInputs) -> Result<Self> {
        if mode == ScheduleMode::Constant {
            return Err(Error::invalid(
                "mode",
                "use Schedule::constant for fixed step sizes",
            ));
        }
        if !(inputs.p > 1.0 && inputs.p <= 2.0) {
            return Err(Error::invalid(
                "p",
                format!("must lie in (1, 2], got {}", inputs.p),
            ));
        }
        nonnegative("sigma", inputs.sigma)?;
        positive("smoothness", inputs.smoothness)?;
        if !(inputs.delta > 0.0 && inputs.delta < 1.0) {
            return Err(Error::invalid("delta", "must lie in (0, 1)"));
        }
        if mode.needs_horizon() {
            match inputs.horizon {
                None => return Err(Error::MissingHorizon { mode: mode.name() }),
                Some(0) => return Err(Error::invalid("horizon", "must be >= 1")),
                Some(_) => {}
            }
        }
        match mode.family() {
            Family::Smd if mode != ScheduleMode::SmdParamFree => {
                positive("r1", inputs.r1)?;
                nonnegative("r0", inputs.r0)?;
                nonnegative("mu", inputs.mu)?;
                nonnegative("g0_norm", inputs.g0_norm)?;
            }
            Family::Smd => {
                positive("c1", inputs.c1)?;
                positive("c2", inputs.c2)?;
                nonnegative("grad1_bound", inputs.grad1_bound)?;
                nonnegative("r1", inputs.r1)?;
            }
            Family::Asmd => {
                positive("r1", inputs.r1)?;
                if let Some(c) = inputs.scaled_c {
                    positive("scaled_c", c)?;
                }
            }
            Family::Sgd => positive("delta1", inputs.delta1)?,
            Family::Constant => unreachable!(),
        }
        Ok(Schedule {
            mode,
            inputs,
            constant: None,
            step_scale: 1.0,
            state: TrajectoryState {
                last_t: 0,
                x1: None,
                max_dist: 0.0,
            },
        })
    }

    /// A fixed (η, λ) schedule; λ = +∞ disables clipping.
    pub fn constant(eta: f64, lambda: f64) -> Result<Self> {
        positive("eta", eta)?;
        if !(lambda > 0.0) || lambda.is_nan() {
            return Err(Error::invalid("lambda", "must be > 0"));
        }
        let mut inputs = ScheduleInputs::new(2.0, 0.0, 1.0, 0.5);
        inputs.horizon = None;
        Ok(Schedule {
            mode: ScheduleMode::Constant,
            inputs,
            constant: Some(StepParams { eta, lambda }),
            step_scale: 1.0,
            state: TrajectoryState {
                last_t: 0,
                x1: None,
                max_dist: 0.0,
            },
        })
    }

    pub fn smd_known_t(inputs: ScheduleInputs) -> Result<Self> {
        Self::new(ScheduleMode::SmdKnownT, inputs)
    }

    pub fn smd_anytime(inputs: ScheduleInputs) -> Result<Self> {
        Self::new(ScheduleMode::SmdAnytime, inputs)
    }

    pub fn smd_param_free(inputs: ScheduleInputs) -> Result<Self> {
        Self::new(ScheduleMode::SmdParamFree, inputs)
    }

    pub fn asmd_known_t(inputs: ScheduleInputs) -> Result<Self> {
        Self::new(ScheduleMode::AsmdKnownT, inputs)
    }

    pub fn asmd_anytime(inputs: ScheduleInputs) -> Result<Self> {
        Self::new(ScheduleMode::AsmdAnytime, inputs)
    }

    pub fn sgd_known_t(inputs: ScheduleInputs) -> Result<Self> {
        Self::new(ScheduleMode::SgdKnownT, inputs)
    }

    pub fn sgd_anytime(inputs: ScheduleInputs) -> Result<Self> {
        Self::new(ScheduleMode::SgdAnytime, inputs)
    }

    /// Multiplies every emitted η by `factor`. Used to build deliberately
    /// miscalibrated schedules for negative tests.
    pub fn with_step_scale(mut self, factor: f64) -> Self {
        self.step_scale = factor;
        self
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn family(&self) -> Family {
        self.mode.family()
    }

    pub fn inputs(&self) -> &ScheduleInputs {
        &self.inputs
    }

    pub fn step_scale(&self) -> f64 {
        self.step_scale
    }

    pub fn gamma(&self) -> f64 {
        self.inputs.gamma()
    }

    /// Clears the trajectory state so the schedule can drive a new run.
    pub fn reset(&mut self) {
        self.state = TrajectoryState {
            last_t: 0,
            x1: None,
            max_dist: 0.0,
        };
    }

    /// Feeds iterate x_t to a trajectory-dependent schedule. Must be called
    /// with t = 1, 2, ... in order; other modes ignore it.
    pub fn observe(&mut self, t: usize, x: &[f64], geometry: &Geometry) -> Result<()> {
        if self.mode != ScheduleMode::SmdParamFree {
            return Ok(());
        }
        if t != self.state.last_t + 1 {
            return Err(Error::StateNotMonotone {
                expected: self.state.last_t + 1,
                got: t,
            });
        }
        self.state.last_t = t;
        match &self.state.x1 {
            None => self.state.x1 = Some(x.to_vec()),
            Some(x1) => {
                let d = geometry.norm(&crate::linalg::sub(x, x1))?;
                self.state.max_dist = self.state.max_dist.max(d);
            }
        }
        Ok(())
    }

    /// max_{i≤t}‖x_i − x₁‖ as tracked so far.
    pub fn max_distance(&self) -> f64 {
        self.state.max_dist
    }

    /// (η_t, λ_t) for step t ≥ 1, including any step scale.
    pub fn params(&self, t: usize) -> StepParams {
        let mut s = self.base_params(t);
        s.eta *= self.step_scale;
        s
    }

    fn base_params(&self, t: usize) -> StepParams {
        debug_assert!(t >= 1);
        let inp = &self.inputs;
        let gamma = inp.gamma();
        let horizon = inp.horizon.unwrap_or(0) as f64;
        match self.mode {
            ScheduleMode::Constant => self.constant.expect("constant schedule has params"),
            ScheduleMode::SmdKnownT | ScheduleMode::SmdAnytime => {
                let h = if self.mode == ScheduleMode::SmdKnownT {
                    horizon
                } else {
                    2.0 * log_weight(t)
                };
                let lambda = inp.smd_lambda(h);
                let c1 = inp.r1 / (24.0 * gamma);
                StepParams {
                    eta: c1 / lambda,
                    lambda,
                }
            }
            ScheduleMode::SmdParamFree => {
                let l = inp.smoothness;
                let lambda = (52.0 * log_weight(t) * inp.c2)
                    .powf(1.0 / inp.p)
                    .max(2.0 * (l * self.state.max_dist + inp.grad1_bound))
                    .max(l * inp.c1 / 6.0);
                StepParams {
                    eta: (inp.c1 / 24.0) / lambda,
                    lambda,
                }
            }
            ScheduleMode::AsmdKnownT | ScheduleMode::AsmdAnytime => {
                let c = self.asmd_c(t);
                let alpha = asmd_alpha(t);
                let l = inp.smoothness;
                StepParams {
                    lambda: c * inp.r1 * gamma * l * alpha / 8.0,
                    eta: 1.0 / (3.0 * c * gamma * gamma * l * alpha),
                }
            }
            ScheduleMode::SgdKnownT => inp.sgd_params(horizon),
            ScheduleMode::SgdAnytime => inp.sgd_params(2.0 * log_weight(t)),
        }
    }

    /// The accelerated constant c (known horizon) or c_t (anytime).
    pub fn asmd_c(&self, t: usize) -> f64 {
        match self.mode {
            ScheduleMode::AsmdKnownT => self.inputs.asmd_c(self.inputs.horizon.unwrap_or(0) as f64),
            _ => self.inputs.asmd_c(2.0 * log_weight(t)),
        }
    }

    /// C₁, C₂, C₃, A used to certify the SMD and SGD schedules; `None` for
    /// the accelerated and constant modes. With σ = 0 the σ-dependent
    /// constants are +∞.
    pub fn proof_constants(&self) -> Option<ProofConstants> {
        let inp = &self.inputs;
        let gamma = inp.gamma();
        let sp = inp.sigma_p();
        match self.mode {
            ScheduleMode::SmdKnownT => Some(ProofConstants {
                c1: inp.r1 / (24.0 * gamma),
                c2: gamma / (26.0 * sp),
                c3: gamma / (26.0 * inp.horizon.unwrap_or(1) as f64 * sp),
                a: 3.0 * gamma,
            }),
            ScheduleMode::SmdAnytime => Some(ProofConstants {
                c1: inp.r1 / (24.0 * gamma),
                c2: gamma / (26.0 * sp),
                c3: gamma / (52.0 * sp),
                a: 3.0 * gamma,
            }),
            ScheduleMode::SmdParamFree => Some(ProofConstants {
                c1: inp.c1 / 24.0,
                c2: 1.0 / (26.0 * inp.c2),
                c3: 1.0 / (52.0 * inp.c2),
                a: gamma + 2.0 * sp / inp.c2,
            }),
            ScheduleMode::SgdKnownT | ScheduleMode::SgdAnytime => Some(ProofConstants {
                c1: inp.delta1.sqrt() / (4.0 * 2f64.sqrt() * gamma),
                c2: 1.0 / sp,
                c3: inp.delta1 / (2048.0 * sp * gamma),
                a: 256.0 * gamma * gamma,
            }),
            _ => None,
        }
    }

    /// The explicit high-probability bound on the run's summary metric after
    /// `horizon` steps (average gap for SMD, final gap for ASMD, average
    /// squared gradient norm for SGD). `None` for constant schedules.
    pub fn rate_bound(&self, horizon: usize) -> Option<f64> {
        let inp = &self.inputs;
        let t = horizon as f64;
        let at_t = self.base_params(horizon);
        match self.mode {
            ScheduleMode::Constant => None,
            ScheduleMode::SmdKnownT | ScheduleMode::SmdAnytime => {
                Some(2.0 * inp.r1 * inp.r1 / (at_t.eta * t))
            }
            ScheduleMode::SmdParamFree => {
                let gamma = inp.gamma();
                let l = inp.smoothness;
                let a = gamma + 2.0 * inp.sigma_p() / inp.c2;
                let lead = inp.r1 + inp.c1 / 3.0 * a;
                let branch = (52.0 * log_weight(horizon) * inp.c2)
                    .powf(1.0 / inp.p)
                    .max(4.0 * inp.r1 * l + 2.0 * inp.c1 / 3.0 * l * a + 2.0 * inp.grad1_bound)
                    .max(l * inp.c1 / 6.0);
                Some(8.0 / (t * inp.c1) * lead * lead * branch)
            }
            ScheduleMode::AsmdKnownT | ScheduleMode::AsmdAnytime => {
                Some(2.0 * inp.r1 * inp.r1 * asmd_alpha(horizon) / at_t.eta)
            }
            ScheduleMode::SgdKnownT | ScheduleMode::SgdAnytime => {
                Some(90.0 * inp.delta1 / (at_t.eta * t))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The condition involves σ and σ = 0, so it holds trivially.
    VacuousPass,
    NotApplicable,
}

impl CheckStatus {
    pub fn is_ok(self) -> bool {
        !matches!(self, CheckStatus::Fail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub status: CheckStatus,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs − lhs; negative when the condition fails.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub mode: ScheduleMode,
    pub horizon: usize,
    pub constants: Option<ProofConstants>,
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status.is_ok())
    }

    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Relative slack for floating-point equality in the checks.
const REL_TOL: f64 = 1e-12;

fn le(name: &str, lhs: f64, rhs: f64) -> ConditionCheck {
    let status = if lhs <= rhs * (1.0 + REL_TOL) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    ConditionCheck {
        name: name.to_string(),
        status,
        lhs,
        rhs,
        margin: rhs - lhs,
    }
}

fn vacuous(name: &str) -> ConditionCheck {
    ConditionCheck {
        name: name.to_string(),
        status: CheckStatus::VacuousPass,
        lhs: 0.0,
        rhs: f64::INFINITY,
        margin: f64::INFINITY,
    }
}

/// Checks the schedule over t = 1..=horizon against its certifying constants.
///
/// SMD-family conditions: λ_tη_t = C₁; Σ λ_t^{−p} ≤ C₂; λ_t^{−2p} ≤ C₃λ_t^{−p};
/// A ≥ max{log(1/δ) + 26σ^pC₂ + 2σ^{2p}C₂C₃/A, 1}; η_t ≤ 1/(4L).
///
/// SGD-family conditions: λ_tη_t√(2L) ≤ C₁; λ_t^{−p}/(Lη_t) ≤ C₂;
/// Σ Lλ_t^{−p}λ_t²η_t² ≤ C₃;
/// A ≥ max{64(log(1/δ) + 60σ^pC₃/C₁²)² + (48σ^{2p}C₂C₃ + 140σ^pC₃)/C₁², 1};
/// η_t ≤ 1/L.
///
/// ASMD-family conditions: η_t ≤ 1/(2Lα_t) and η_{t−1}/α_{t−1} ≥ η_t(1−α_t)/α_t.
///
/// For the trajectory-dependent schedule the λ_t are those implied by the
/// schedule's current state; every branch only raises λ_t, so the checks
/// remain valid along any trajectory.
pub fn verify_conditions(schedule: &Schedule, horizon: usize) -> ConditionReport {
    let horizon = horizon.max(1);
    let inp = schedule.inputs();
    let params: Vec<StepParams> = (1..=horizon).map(|t| schedule.params(t)).collect();
    let constants = schedule.proof_constants();
    let l = inp.smoothness;
    let p = inp.p;
    let sp = inp.sigma_p();
    let log_inv_delta = (1.0 / inp.delta).ln();
    let mut checks = Vec::new();
    match (schedule.family(), constants) {
        (Family::Smd, Some(k)) => {
            let worst = params
                .iter()
                .map(|s| s.eta * s.lambda)
                .max_by(|a, b| {
                    ((a / k.c1) - 1.0)
                        .abs()
                        .total_cmp(&((b / k.c1) - 1.0).abs())
                })
                .unwrap_or(k.c1);
            let status = if ((worst / k.c1) - 1.0).abs() <= REL_TOL {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            checks.push(ConditionCheck {
                name: "eta-lambda-product".into(),
                status,
                lhs: worst,
                rhs: k.c1,
                margin: -(worst - k.c1).abs(),
            });
            let sigma_free = schedule.mode() == ScheduleMode::SmdParamFree;
            if sp == 0.0 && !sigma_free {
                checks.push(vacuous("sum-inverse-lambda-p"));
                checks.push(vacuous("inverse-lambda-p"));
            } else {
                let sum: f64 = params.iter().map(|s| s.lambda.powf(-p)).sum();
                checks.push(le("sum-inverse-lambda-p", sum, k.c2));
                let max = params
                    .iter()
                    .map(|s| s.lambda.powf(-2.0 * p) / s.lambda.powf(-p))
                    .fold(0.0, f64::max);
                checks.push(le("inverse-lambda-p", max, k.c3));
            }
            let noise = if sp == 0.0 {
                0.0
            } else {
                26.0 * sp * k.c2 + 2.0 * sp * sp * k.c2 * k.c3 / k.a
            };
            checks.push(le("a-inequality", (log_inv_delta + noise).max(1.0), k.a));
            let max_eta = params.iter().map(|s| s.eta).fold(0.0, f64::max);
            checks.push(le("step-size-cap", max_eta, 1.0 / (4.0 * l)));
        }
        (Family::Sgd, Some(k)) => {
            let c1_lhs = params
                .iter()
                .map(|s| s.lambda * s.eta * (2.0 * l).sqrt())
                .fold(0.0, f64::max);
            checks.push(le("eta-lambda-product", c1_lhs, k.c1));
            if sp == 0.0 {
                checks.push(vacuous("inverse-lambda-p-over-eta"));
                checks.push(vacuous("sum-lambda-weighted"));
            } else {
                let c2_lhs = params
                    .iter()
                    .map(|s| s.lambda.powf(-p) / (l * s.eta))
                    .fold(0.0, f64::max);
                checks.push(le("inverse-lambda-p-over-eta", c2_lhs, k.c2));
                let c3_lhs: f64 = params
                    .iter()
                    .map(|s| l * s.lambda.powf(-p) * s.lambda * s.lambda * s.eta * s.eta)
                    .sum();
                checks.push(le("sum-lambda-weighted", c3_lhs, k.c3));
            }
            let (t1, t2) = if sp == 0.0 {
                (0.0, 0.0)
            } else {
                (
                    60.0 * sp * k.c3 / (k.c1 * k.c1),
                    (48.0 * sp * sp * k.c2 * k.c3 + 140.0 * sp * k.c3) / (k.c1 * k.c1),
                )
            };
            let need = (64.0 * (log_inv_delta + t1).powi(2) + t2).max(1.0);
            checks.push(le("a-inequality", need, k.a));
            let max_eta = params.iter().map(|s| s.eta).fold(0.0, f64::max);
            checks.push(le("step-size-cap", max_eta, 1.0 / l));
        }
        (Family::Asmd, _) => {
            let cap = params
                .iter()
                .enumerate()
                .map(|(i, s)| s.eta * 2.0 * l * asmd_alpha(i + 1))
                .fold(0.0, f64::max);
            checks.push(le("step-size-cap", cap, 1.0));
            let worst = (2..=horizon)
                .map(|t| {
                    let prev = params[t - 2].eta / asmd_alpha(t - 1);
                    let a = asmd_alpha(t);
                    params[t - 1].eta * (1.0 - a) / a / prev
                })
                .fold(0.0, f64::max);
            checks.push(le("weight-monotonicity", worst, 1.0));
        }
        _ => checks.push(ConditionCheck {
            name: "certified-schedule".into(),
            status: CheckStatus::NotApplicable,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
        }),
    }
    ConditionReport {
        mode: schedule.mode(),
        horizon,
        constants,
        checks,
    }
}
