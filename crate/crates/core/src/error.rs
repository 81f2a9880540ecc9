use thiserror::Error;

/// Errors raised anywhere in the mitigation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix inversion failed (condition number {condition:e})")]
    Inversion { condition: f64 },

    #[error("decomposition infeasible: {0}")]
    Infeasible(String),

    #[error("numerical validity error: {0}")]
    Numerical(String),

    #[error("unknown gate label `{0}`")]
    UnknownGate(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on `{path}`: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures that stem from the numerics (singular systems,
    /// infeasible decompositions, negative probabilities) rather than from
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Inversion { .. } | Error::Infeasible(_) | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
