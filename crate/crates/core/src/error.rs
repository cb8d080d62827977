use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("bound not applicable: {0}")]
    Domain(String),

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("state left [0,1] by {magnitude:e} at t = {t} (integrator misuse)")]
    ClampViolation { t: f64, magnitude: f64 },

    #[error("{what} did not converge (last residual {residual:e})")]
    NonConvergence { what: &'static str, residual: f64 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::ClampViolation { .. } | Error::NonConvergence { .. }
        )
    }
}
