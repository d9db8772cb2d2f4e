use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("series did not converge within {terms} terms")]
    NonConvergence { terms: usize },

    #[error("factorial of order {0} overflows double precision")]
    Overflow(usize),

    #[error("point lies on a density discontinuity of the flat host")]
    OnBoundary,

    #[error("point lies outside the support of the host density")]
    OutsideSupport,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("Monte Carlo budget {budget} too small: {reason}")]
    BudgetTooSmall { budget: usize, reason: &'static str },

    #[error("closed form not valid: {0}")]
    OutOfValidity(String),

    #[error("slope {slope:.3e} indistinguishable from noise (std err {std_err:.3e})")]
    NoisySlope { slope: f64, std_err: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
