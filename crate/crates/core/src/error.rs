use thiserror::Error;

use crate::hypothesis::HypothesisShape;

/// Errors produced by the estimation, control and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    Empty,

    #[error("length mismatch: {stats} statistics but {margins} margins")]
    LengthMismatch { stats: usize, margins: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("equivalence margins must be positive; index {index} has margin {value}")]
    NonPositiveMargin { index: usize, value: f64 },

    #[error("threshold must be finite and non-negative, got {0}")]
    InvalidThreshold(f64),

    #[error("gamma must lie in [0, 1), got {0}")]
    InvalidGamma(f64),

    #[error("operation expects {expected} hypotheses but the input is {found}")]
    ShapeMismatch {
        expected: HypothesisShape,
        found: HypothesisShape,
    },

    #[error("invalid p-value {value} at index {index}")]
    InvalidPValue { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The request is well-formed but too large to enumerate.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_threshold(t: f64) -> Result<f64> {
    if t.is_finite() && t >= 0.0 {
        Ok(t)
    } else {
        Err(Error::InvalidThreshold(t))
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<f64> {
    if (0.0..1.0).contains(&gamma) {
        Ok(gamma)
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}
