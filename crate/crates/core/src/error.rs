use thiserror::Error;

use crate::interpolation::MonotonicityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("spectrum is not Hermitian (max asymmetry {asymmetry:.3e})")]
    SymmetryViolation { asymmetry: f64 },

    #[error("expected a {expected}-component field, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("grid size mismatch: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("order {order} exceeds the configured maximum {max}")]
    Capacity { order: usize, max: usize },

    #[error("stack state error: {0}")]
    State(String),

    #[error("numerical failure at {stage}: {detail}")]
    NumericalFailure { stage: String, detail: String },

    #[error("step too large: displacement max-norm {max_displacement:.4} >= pi")]
    StepTooLarge { max_displacement: f64 },

    #[error("reversion failed: monotonicity violated on {} vertical and {} horizontal lines", .0.vertical.len(), .0.horizontal.len())]
    Reversion(MonotonicityReport),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("output time mismatch: {0}")]
    TimeMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Parse(_)
            | Error::InvalidInput(_)
            | Error::ShapeMismatch { .. }
            | Error::TimeMismatch(_) => 2,
            Error::Reversion(_) => 4,
            Error::Io(_) => 1,
            _ => 3,
        }
    }

    pub(crate) fn numerical(stage: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::NumericalFailure {
            stage: stage.into(),
            detail: detail.into(),
        }
    }
}
