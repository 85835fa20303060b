use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical kernels and the graph model.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate value: {0}")]
    Degenerate(String),

    #[error("instance too large for exact enumeration: size {size} exceeds limit {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e} after {intervals} panels)")]
    ToleranceNotMet {
        tol: f64,
        estimate: f64,
        intervals: usize,
    },

    #[error("bin {0} is empty")]
    EmptyBin(usize),

    #[error("relaxed c=2 envelope needs q >= every bin representative; offending bins: {0:?}")]
    RelaxedPrecondition(Vec<usize>),

    #[error("backward second difference needs q > 2*beta (q = {q}, beta = {beta})")]
    NotIntegrable { q: f64, beta: f64 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex {0} is isolated; normalized weights need positive degrees")]
    IsolatedVertex(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("objective diverged at step {0}")]
    Diverged(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
