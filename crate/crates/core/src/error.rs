use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("covariance matrix is not physical: smallest symplectic eigenvalue {0}")]
    NonPhysical(f64),

    #[error("no threshold in (0, 1]")]
    NoThreshold,

    #[error("operation requires a radially symmetric state (|c1| = |c2|)")]
    NonRadial,

    #[error("numerical integration failed: integral of W is {normalization}, expected 1")]
    Discretization { normalization: f64 },

    #[error("inconsistent purities: {0}")]
    InconsistentPurities(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("rejection envelope violated at x = {x} (ratio {ratio} > bound {bound})")]
    EnvelopeViolation { x: f64, ratio: f64, bound: f64 },

    #[error("insufficient data: {got} samples, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
