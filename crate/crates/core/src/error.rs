use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("divergence undefined: y[{index}] is zero while x[{index}] is positive")]
    DivergenceUndefined { index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("p-th moment would be infinite: tail index {tail_index} must exceed p = {p}")]
    InfiniteMoment { p: f64, tail_index: f64 },

    #[error("schedule `{mode}` requires a horizon T")]
    MissingHorizon { mode: &'static str },

    #[error("Weiszfeld iteration did not converge after {iterations} iterations")]
    WeiszfeldNotConverged { iterations: usize },

    #[error("trajectory state updated out of order: expected t = {expected}, got t = {got}")]
    StateNotMonotone { expected: usize, got: usize },

    #[error("schedule `{mode}` cannot drive the {algorithm} loop")]
    ScheduleMismatch {
        mode: &'static str,
        algorithm: &'static str,
    },

    #[error("{0}")]
    Unsupported(String),

    #[error("metric at index {index} is {value}; log-log fit needs positive values")]
    NonPositiveMetric { index: usize, value: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: v.len(),
        })
    }
}

pub(crate) fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::invalid(name, format!("entry {i} is not finite"))),
    }
}
