use thiserror::Error;

/// Errors produced by the hodograph library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix exponential overflows (||tA||_1 = {norm:e})")]
    Overflow { norm: f64 },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("{0}")]
    Domain(String),

    #[error("force matrix has rank {rank} < {n}; use the degenerate pipeline")]
    Degenerate { rank: usize, n: usize },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("hodograph Jacobian is singular at M = {m:?} (blow-up surface hit)")]
    JacobianSingular { m: Vec<f64> },

    #[error("Newton iterate left the M-domain near M = {m:?}")]
    DomainExit { m: Vec<f64> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported problem: {0}")]
    Unsupported(String),

    #[error("step-count limit exceeded ({steps} steps requested)")]
    TooManySteps { steps: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
