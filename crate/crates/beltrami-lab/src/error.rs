//! Error type shared by the library modules.

use thiserror::Error;

/// Errors reported by grid construction, solvers and functional checks.
#[derive(Debug, Error)]
pub enum LabError {
    /// A constructor or routine received a parameter outside its domain.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: String,
    },

    /// Two grids that must share a descriptor do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The Neumann iteration kept growing instead of settling.
    #[error("Neumann series diverging: {0}")]
    Divergence(String),

    /// A measured quantity violates a hypothesis the routine relies on.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed field file: {0}")]
    Format(String),
}

impl LabError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
