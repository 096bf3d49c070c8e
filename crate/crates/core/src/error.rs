use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite state at step {step} (t = {time})")]
    Overflow { step: usize, time: f64 },

    #[error("path {path}: {source}")]
    PathFailed {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("value out of representable range: {0}")]
    Range(String),

    #[error("non-finite integrand value at r = {at}")]
    NonFiniteIntegrand { at: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("window [{t0}, {t1}] holds {points} recorded points, need at least {required}")]
    WindowTooShort {
        t0: f64,
        t1: f64,
        points: usize,
        required: usize,
    },

    #[error("integrability conditions not satisfied: {0}")]
    ConditionsNotMet(String),

    #[error("warp table: {0}")]
    WarpTable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {value}")))
    }
}
