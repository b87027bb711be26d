use thiserror::Error;

use crate::manifold::RetractionKind;
use crate::optimize::IterateTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("{kind:?} retraction failed: X + Z is numerically rank deficient")]
    RetractionFailure { kind: RetractionKind },

    #[error("multiplier system is singular (smallest eigenvalue of XᵀB²X is {0:.3e}); X is outside the safe region")]
    SingularMultiplierSystem(f64),

    #[error("XᵀBX is numerically singular")]
    SingularGram,

    #[error("landing field vanished")]
    FieldVanished,

    #[error("point is outside the safe region: ‖h‖ = {h_norm:.3e} > ε = {epsilon:.3e}")]
    OutsideSafeRegion { h_norm: f64, epsilon: f64 },

    #[error("iterate {iteration} left the safe region: ‖h‖ = {h_norm:.3e} > ε = {epsilon:.3e}")]
    LeftSafeRegion {
        iteration: usize,
        h_norm: f64,
        epsilon: f64,
        trace: Box<IterateTrace>,
    },

    #[error("iteration diverged at step {iteration} (non-finite iterate)")]
    Diverged {
        iteration: usize,
        trace: Box<IterateTrace>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample stream exhausted")]
    SamplerExhausted,

    #[error("eigensolver failed: {0}")]
    Eigensolver(&'static str),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
