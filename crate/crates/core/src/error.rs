use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("quadrature did not converge: estimated error {error:e} exceeds {tol:e}")]
    Quadrature { error: f64, tol: f64 },

    #[error("series did not reach tolerance {tol:e} within {terms} terms")]
    SeriesTruncation { tol: f64, terms: usize },

    #[error("truncation too small: need at least {required}, have {available}")]
    Truncation { required: usize, available: usize },

    #[error("division by zero risk at {context}")]
    ZeroRisk { context: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects NaN and infinities, tagging the error with `context`.
pub(crate) fn finite(value: f64, context: impl FnOnce() -> String) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { context: context() })
    }
}
