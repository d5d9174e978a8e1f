use thiserror::Error;

use crate::jets::JetError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("point {point:?} lies outside the domain of `{label}`")]
    OutsideDomain { label: String, point: Vec<f64> },
    #[error("metric `{label}` is not positive definite at {point:?}")]
    NotPositiveDefinite { label: String, point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error("precondition `{check}` failed: {detail}")]
    Precondition { check: &'static str, detail: String },
    #[error("critical point of the lapse: |grad f| = {norm:e}")]
    CriticalPoint { norm: f64 },
    #[error("lapse value {f} not allowed here ({reason})")]
    LapseValue { f: f64, reason: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("zero-mass case out of scope")]
    ZeroMass,
}

pub type Result<T> = std::result::Result<T, Error>;
