use thiserror::Error;

/// Errors raised by the estimators, oracles and calculators.
#[derive(Debug, Error)]
pub enum HssError {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("index {index} out of range for sample of size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("hypothesis set is empty")]
    EmptyHypothesisSet,
    #[error("hypothesis set is not finite; {0} needs an enumerable set")]
    NotFinite(&'static str),
    #[error("enumeration budget exceeded: {what} needs {needed}, budget is {budget}")]
    Budget {
        what: &'static str,
        needed: u128,
        budget: u128,
    },
    #[error("declared sensitivity {declared} violated: measured {measured}")]
    SensitivityViolation { declared: f64, measured: f64 },
    #[error("eigengap {gap:.3e} below tolerance {tolerance:.3e}")]
    Eigengap { gap: f64, tolerance: f64 },
    #[error("optimizer diverged: {0}")]
    Divergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HssError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HssError::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, HssError>;
