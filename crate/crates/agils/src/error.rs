use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum AgilsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An oracle or solver produced a NaN/Inf. Divergence is surfaced
    /// rather than clamped.
    #[error("non-finite iterate encountered in {context}")]
    NonFiniteIterate { context: String },

    /// Inner solver ran out of iterations. Carries the best point found
    /// and its residual so callers can decide what to do.
    #[error("inner solver hit max_iter={max_iter} with residual {residual:.3e} (target {target:.3e})")]
    MaxIterExceeded {
        max_iter: usize,
        residual: f64,
        target: f64,
        best: crate::problem::Vector,
    },

    #[error("outer loop hit max_outer={0} before the stopping rule fired")]
    MaxOuterExceeded(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AgilsError>;
