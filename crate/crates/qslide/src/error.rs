//! Error taxonomy shared by every module.
//!
//! Three broad classes matter to callers: configuration problems (bad sizes,
//! ranges, malformed inputs), numerical-validation failures (a computation
//! ran but violated a physical tolerance), and I/O. The CLI maps the first
//! class to exit code 1 and the second to exit code 2.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum QslideError {
    /// Chain or graph constructed with an unusable size.
    #[error("invalid size: {0}")]
    InvalidSize(String),

    /// Scalar argument outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Schedule construction with inconsistent times.
    #[error("schedule error: {0}")]
    Schedule(String),

    /// Vector/matrix dimension mismatch.
    #[error("shape error: {0}")]
    Shape(String),

    /// Widget description failed structural validation.
    #[error("widget mismatch: {0}")]
    WidgetMismatch(String),

    /// Scattering linear system is singular at this energy.
    #[error("resonance: scattering system singular at E = {energy}")]
    Resonance { energy: f64 },

    /// A numerical procedure failed to reach its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Statistics requested over a window with no probability.
    #[error("undefined statistics: {0}")]
    UndefinedStats(String),

    /// Site window does not lie on the graph.
    #[error("range error: {0}")]
    Range(String),

    /// Experiment configuration invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Switch-time tuning could not evaluate its objective.
    #[error("tuning error: {0}")]
    Tuning(String),

    /// Gate and reference layouts cannot be compared.
    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, QslideError>;

impl QslideError {
    /// Process exit code the CLI reports for this error.
    ///
    /// 1 for configuration problems, 2 for numerical-validation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            QslideError::InvalidSize(_)
            | QslideError::Domain(_)
            | QslideError::Schedule(_)
            | QslideError::Shape(_)
            | QslideError::WidgetMismatch(_)
            | QslideError::Range(_)
            | QslideError::Config(_)
            | QslideError::Comparison(_)
            | QslideError::Io(_)
            | QslideError::Parse(_) => 1,
            QslideError::Resonance { .. }
            | QslideError::Numerical(_)
            | QslideError::UndefinedStats(_)
            | QslideError::Tuning(_) => 2,
        }
    }
}
