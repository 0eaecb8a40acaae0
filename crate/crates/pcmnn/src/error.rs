//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the modeling pipeline.
///
/// Variants are grouped by what went wrong rather than where: callers (in
/// particular the CLI) map them onto exit codes by kind.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file content; `line` is 1-based and includes the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Structurally valid input that violates a data contract
    /// (missing dates, duplicate records, out-of-range values).
    #[error("data error: {0}")]
    Data(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A NaN or infinity surfaced where a finite value is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// The ODE integrator produced a non-finite state.
    #[error("integration blew up at t = {t_day} days")]
    Blowup { t_day: f64 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    /// True for numerical failures (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Blowup { .. })
    }
}
