//! Experiment configuration: a sectioned TOML file, dotted `key=value`
//! overrides, validation that names the offending field, and a content digest.
//!
//! ```toml
//! [experiment]
//! id = "smd-quadratic"
//! algorithm = "smd"          # smd | asmd | sgd | vanilla-sgd
//! horizon = 1024             # or: horizons = [256, 512, 1024, 2048]
//! seeds = 200
//! base_seed = 0
//! delta = 0.1
//! output_dir = "results"
//!
//! [problem]
//! kind = "quadratic"         # quadratic | simplex-quadratic | nonconvex-ratio | smooth-plus-norm
//! diag = [1.0, 1.0]
//! x1 = [1.0, 0.0]
//!
//! [noise]
//! kind = "two-point"         # two-point | radial-pareto
//! p = 1.5
//! sigma = 1.0
//! q = 0.001
//!
//! [schedule]
//! mode = "smd-known-t"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::Algorithm;
use crate::clipping::estimate_g0;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::noise::{NoiseModel, Oracle};
use crate::problems::Problem;
use crate::schedules::{Schedule, ScheduleInputs, ScheduleMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    pub noise: NoiseSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

fn default_seeds() -> usize {
    100
}

fn default_delta() -> f64 {
    0.1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub id: String,
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Quadratic,
    SimplexQuadratic,
    NonconvexRatio,
    SmoothPlusNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    /// Required unless implied by `diag` or `target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Quadratic curvature; defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<Vec<f64>>,
    /// Quadratic minimizer; defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    /// Starting point x₁ (y₁ = z₁ for the accelerated method).
    pub x1: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryChoice {
    /// The problem's native geometry.
    #[default]
    Native,
    Euclidean,
    Ball,
    Simplex,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(default)]
    pub kind: GeometryChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseChoice {
    TwoPoint,
    RadialPareto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseChoice,
    pub p: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_index: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum G0Choice {
    /// g₀ = ∇f(x₀), μ = 0.
    #[default]
    Exact,
    /// Geometric median of block means of stochastic gradients at x₀.
    MedianOfMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub mode: ScheduleMode,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    /// Replacement for the 10⁴ floor of the accelerated constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled_c: Option<f64>,
    /// Constant mode step size; also the vanilla baseline's step size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Constant mode clipping level; omitted means no clipping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "one")]
    pub step_scale: f64,
    /// Reference point x₀ for the initial gradient; defaults to x₁.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub g0: G0Choice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0_blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0_block_size: Option<usize>,
    /// Upper bound ∇₁ on ‖∇f(x₁)‖_*; defaults to the exact value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad1_bound: Option<f64>,
}

fn default_mc_samples() -> usize {
    200
}

fn default_clip_error_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "yes")]
    pub conditions: bool,
    #[serde(default = "yes")]
    pub pathwise: bool,
    #[serde(default)]
    pub clip_error: bool,
    #[serde(default)]
    pub martingale: bool,
    #[serde(default = "yes")]
    pub mgf: bool,
    /// Resamples per step for the conditional moments of the trace.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_clip_error_samples")]
    pub clip_error_samples: usize,
    /// Q in the mirror descent trace; defaults to 3γ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub martingale_q: Option<f64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            conditions: true,
            pathwise: true,
            clip_error: false,
            martingale: false,
            mgf: true,
            mc_samples: default_mc_samples(),
            clip_error_samples: default_clip_error_samples(),
            martingale_q: None,
        }
    }
}

/// Rewrites a library error as a config error naming the field.
fn field_err(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason }
            if name == section || name.starts_with(&format!("{section}.")) =>
        {
            Error::Config(format!("{name}: {reason}"))
        }
        Error::InvalidParameter { name, reason } => {
            Error::Config(format!("{section}.{name}: {reason}"))
        }
        Error::InfiniteMoment { p, tail_index } => Error::Config(format!(
            "{section}.tail_index: {tail_index} must exceed p = {p} for a finite p-th moment"
        )),
        Error::DimensionMismatch { expected, got } => Error::Config(format!(
            "{section}: dimension mismatch, expected {expected}, got {got}"
        )),
        Error::MissingHorizon { mode } => Error::Config(format!(
            "experiment.horizon: schedule `{mode}` requires a horizon"
        )),
        Error::Config(m) => Error::Config(m),
        other => Error::Config(format!("{section}: {other}")),
    }
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| cfg(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parses `text`, applies `key=value` overrides, then validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| cfg(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let config: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| cfg(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg(e.to_string()))
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> Result<String> {
        let text = self.to_toml_string()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    /// Every horizon the experiment names: `horizons` if present, else `horizon`.
    pub fn horizon_grid(&self) -> Vec<usize> {
        match (&self.experiment.horizons, self.experiment.horizon) {
            (Some(h), _) => h.clone(),
            (None, Some(t)) => vec![t],
            (None, None) => Vec::new(),
        }
    }

    /// The single horizon used by `run`, `diagnose` and `compare`.
    pub fn horizon(&self) -> Result<usize> {
        self.experiment
            .horizon
            .or_else(|| {
                self.experiment
                    .horizons
                    .as_ref()
                    .and_then(|h| h.last().copied())
            })
            .ok_or_else(|| cfg("experiment.horizon: missing"))
    }

    /// Checks every constraint by building the experiment.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<Experiment> {
        let e = &self.experiment;
        if e.id.is_empty() || e.id.contains(['/', '\\']) || e.id == ".." || e.id == "." {
            return Err(cfg(
                "experiment.id: must be a non-empty name without path separators",
            ));
        }
        if e.seeds == 0 {
            return Err(cfg("experiment.seeds: must be >= 1"));
        }
        if !(e.delta > 0.0 && e.delta < 1.0) {
            return Err(cfg(format!(
                "experiment.delta: must lie in (0, 1), got {}",
                e.delta
            )));
        }
        if self.horizon_grid().contains(&0) {
            return Err(cfg("experiment.horizon: must be >= 1"));
        }
        let problem = self.build_problem()?;
        let noise = self.build_noise()?;
        noise
            .check_geometry(problem.geometry())
            .map_err(|err| field_err("noise", err))?;
        let x1 = self.problem.x1.clone();
        problem
            .check_start("x1", &x1)
            .map_err(|err| field_err("problem", err))?;
        let inputs = self.schedule_inputs(&problem, &noise)?;
        let experiment = Experiment {
            config: self.clone(),
            problem,
            noise,
            x1,
            inputs,
        };
        self.check_schedule(&experiment)?;
        Ok(experiment)
    }

    fn build_problem(&self) -> Result<Problem> {
        let s = &self.problem;
        let dim = s
            .dim
            .or(s.diag.as_ref().map(Vec::len))
            .or(s.target.as_ref().map(Vec::len))
            .unwrap_or(s.x1.len());
        if dim == 0 {
            return Err(cfg("problem.dim: must be >= 1"));
        }
        if s.x1.len() != dim {
            return Err(cfg(format!(
                "problem.x1: expected {dim} entries, got {}",
                s.x1.len()
            )));
        }
        let problem = match s.kind {
            ProblemKind::Quadratic => Problem::quadratic(
                s.diag.clone().unwrap_or_else(|| vec![1.0; dim]),
                s.shift.clone().unwrap_or_else(|| vec![0.0; dim]),
            ),
            ProblemKind::SimplexQuadratic => Problem::simplex_quadratic(
                s.target
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / dim as f64; dim]),
            ),
            ProblemKind::NonconvexRatio => Problem::nonconvex_ratio(dim),
            ProblemKind::SmoothPlusNorm => Problem::smooth_plus_norm(
                dim,
                s.weight.ok_or_else(|| cfg("problem.weight: missing"))?,
            ),
        }
        .map_err(|err| field_err("problem", err))?;
        let g = &self.geometry;
        let geometry = match g.kind {
            GeometryChoice::Native => return Ok(problem),
            GeometryChoice::Euclidean => Geometry::euclidean(dim),
            GeometryChoice::Ball => Geometry::ball(
                g.radius.ok_or_else(|| cfg("geometry.radius: missing"))?,
                g.center.clone().unwrap_or_else(|| vec![0.0; dim]),
            ),
            GeometryChoice::Simplex => Geometry::simplex(dim),
        }
        .map_err(|err| field_err("geometry", err))?;
        problem
            .with_geometry(geometry)
            .map_err(|err| field_err("geometry", err))
    }

    fn build_noise(&self) -> Result<NoiseModel> {
        let n = &self.noise;
        match n.kind {
            NoiseChoice::TwoPoint => NoiseModel::two_point(
                n.p,
                n.sigma,
                n.q.ok_or_else(|| cfg("noise.q: missing for two-point noise"))?,
            ),
            NoiseChoice::RadialPareto => NoiseModel::radial_pareto(
                n.p,
                n.sigma,
                n.tail_index
                    .ok_or_else(|| cfg("noise.tail_index: missing for radial-pareto noise"))?,
            ),
        }
        .map_err(|err| field_err("noise", err))
    }

    fn schedule_inputs(&self, problem: &Problem, noise: &NoiseModel) -> Result<ScheduleInputs> {
        let s = &self.schedule;
        let geo = problem.geometry();
        let x1 = &self.problem.x1;
        let mut inputs = ScheduleInputs::new(
            noise.p(),
            noise.sigma(),
            problem.smoothness(),
            self.experiment.delta,
        );
        inputs.c1 = s.c1;
        inputs.c2 = s.c2;
        inputs.scaled_c = s.scaled_c;
        inputs.delta1 = problem.gap(x1);
        let grad1 = geo
            .dual_norm(&problem.gradient(x1))
            .map_err(|e| field_err("problem", e))?;
        inputs.grad1_bound = match s.grad1_bound {
            Some(b) if b < grad1 => {
                return Err(cfg(format!(
                    "schedule.grad1_bound: {b} is below the exact gradient norm {grad1}"
                )))
            }
            Some(b) => b,
            None => grad1,
        };
        let x0 = s.x0.clone().unwrap_or_else(|| x1.clone());
        problem
            .check_start("x0", &x0)
            .map_err(|e| field_err("schedule", e))?;
        if let Some(xs) = problem.minimizer() {
            inputs.r1 = (2.0 * geo.bregman(xs, x1).map_err(|e| field_err("problem", e))?).sqrt();
            inputs.r0 = (2.0 * geo.bregman(xs, &x0).map_err(|e| field_err("schedule", e))?).sqrt();
        }
        match s.g0 {
            G0Choice::Exact => {
                inputs.g0_norm = geo
                    .dual_norm(&problem.gradient(&x0))
                    .map_err(|e| field_err("schedule", e))?;
            }
            G0Choice::MedianOfMeans => {
                let blocks = s.g0_blocks.unwrap_or(10);
                let size = s.g0_block_size.unwrap_or(10);
                let seed = self.experiment.base_seed.wrapping_sub(1);
                let mut oracle =
                    Oracle::new(problem, noise, seed).map_err(|e| field_err("noise", e))?;
                let est = estimate_g0(&mut oracle, &x0, blocks, size)
                    .map_err(|e| field_err("schedule", e))?;
                inputs.g0_norm = geo
                    .dual_norm(&est.g0)
                    .map_err(|e| field_err("schedule", e))?;
                inputs.mu = est.mu;
            }
        }
        Ok(inputs)
    }

    fn check_schedule(&self, exp: &Experiment) -> Result<()> {
        let s = &self.schedule;
        if !(s.step_scale > 0.0 && s.step_scale.is_finite()) {
            return Err(cfg("schedule.step_scale: must be finite and > 0"));
        }
        let algorithm = self.experiment.algorithm;
        if algorithm == Algorithm::VanillaSgd {
            return match s.eta {
                Some(eta) if eta > 0.0 && eta.is_finite() => Ok(()),
                _ => Err(cfg(
                    "schedule.eta: vanilla-sgd needs a finite step size > 0",
                )),
            };
        }
        let family_ok = matches!(
            (algorithm, s.mode.family()),
            (_, crate::schedules::Family::Constant)
                | (Algorithm::Smd, crate::schedules::Family::Smd)
                | (Algorithm::Asmd, crate::schedules::Family::Asmd)
                | (Algorithm::Sgd, crate::schedules::Family::Sgd)
        );
        if !family_ok {
            return Err(cfg(format!(
                "schedule.mode: `{}` cannot drive the {} loop",
                s.mode.name(),
                algorithm.name()
            )));
        }
        if matches!(algorithm, Algorithm::Sgd)
            && !exp.problem.geometry().is_unconstrained_euclidean()
        {
            return Err(cfg(
                "geometry.kind: sgd requires the unconstrained Euclidean geometry",
            ));
        }
        if matches!(algorithm, Algorithm::Smd | Algorithm::Asmd)
            && s.mode != ScheduleMode::Constant
            && exp.problem.minimizer().is_none()
        {
            return Err(cfg(
                "problem.kind: mirror descent schedules need a convex problem with known minimizer",
            ));
        }
        if s.mode.needs_horizon() && self.horizon_grid().is_empty() {
            return Err(cfg(format!(
                "experiment.horizon: schedule `{}` requires a horizon",
                s.mode.name()
            )));
        }
        let horizon = self.horizon_grid().into_iter().max().unwrap_or(1);
        let schedule = exp.schedule(horizon)?;
        let l = exp.problem.smoothness();
        // Step-size caps over the configured run length.
        let cap = |t: usize| match s.mode.family() {
            crate::schedules::Family::Smd => 1.0 / (4.0 * l),
            crate::schedules::Family::Asmd => 1.0 / (2.0 * l * crate::schedules::asmd_alpha(t)),
            crate::schedules::Family::Sgd => 1.0 / l,
            crate::schedules::Family::Constant => f64::INFINITY,
        };
        if let Some(t) = (1..=horizon).find(|&t| schedule.params(t).eta > cap(t) * (1.0 + 1e-12)) {
            return Err(cfg(format!(
                "schedule.step_scale: step size at t = {t} exceeds its cap {}",
                cap(t)
            )));
        }
        Ok(())
    }
}

/// Sets `section.key = value` in a TOML table. The value is parsed as a TOML
/// value, falling back to a bare string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| cfg(format!("--set {assignment}: expected key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(cfg(format!("--set {assignment}: malformed key")));
    }
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for p in path {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| cfg(format!("--set {assignment}: `{p}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// A validated configuration with its constructed objects.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub noise: NoiseModel,
    pub x1: Vec<f64>,
    /// Schedule inputs without a horizon.
    pub inputs: ScheduleInputs,
}

impl Experiment {
    /// A fresh schedule for a run of length `horizon`.
    pub fn schedule(&self, horizon: usize) -> Result<Schedule> {
        let s = &self.config.schedule;
        let schedule = if s.mode == ScheduleMode::Constant {
            let eta = s
                .eta
                .ok_or_else(|| cfg("schedule.eta: missing for constant mode"))?;
            Schedule::constant(eta, s.lambda.unwrap_or(f64::INFINITY))
                .map_err(|e| field_err("schedule", e))?
        } else {
            let mut inputs = self.inputs.clone();
            inputs.horizon = Some(horizon);
            Schedule::new(s.mode, inputs).map_err(|e| field_err("schedule", e))?
        };
        Ok(schedule.with_step_scale(s.step_scale))
    }
}
