use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("unbound name `{0}`")]
    UnboundName(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("duplicate seed index {0}")]
    DuplicateSeed(usize),

    #[error("operation requires a {expected} constraint, got {got}")]
    WrongKind { expected: String, got: String },

    #[error("bilinear form h is degenerate (cond = {cond:.3e})")]
    Degenerate { cond: f64 },

    #[error("inputs are time dependent; use the time-dependent variant")]
    TimeDependentInput,

    #[error("time-dependence flags do not match the requested operation: {0}")]
    WrongTimeFlags(String),

    #[error("implicit constraint Jacobian is singular (cond = {cond:.3e})")]
    SingularJacobian { cond: f64 },

    #[error("Newton iteration did not converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("constraint singularity reached at t = {t}: {msg}")]
    SingularityReached { t: f64, msg: String },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
