use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("{op} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        op: &'static str,
        iterations: usize,
        residual: f64,
        /// Best parameters reached before giving up.
        best: Vec<f64>,
    },

    #[error("degenerate input to {op}: {reason}")]
    Degenerate { op: &'static str, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("target unreachable in {op}: {reason}")]
    Unreachable { op: &'static str, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { op, reason: reason.into() }
    }

    pub(crate) fn invalid(reason: impl Into<String>) -> Self {
        Error::InvalidParameter(reason.into())
    }

    pub(crate) fn degenerate(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Degenerate { op, reason: reason.into() }
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotConverged { .. } | Error::Unreachable { .. } | Error::Calibration(_))
    }
}
