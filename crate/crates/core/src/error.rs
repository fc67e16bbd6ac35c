use thiserror::Error;

/// Errors raised by the surrogate library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polygon {id}: {reason}")]
    InvalidPolygon { id: usize, reason: String },

    #[error("invalid microstructure: {0}")]
    InvalidMicrostructure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(
        "target volume fraction not reached after {attempts} attempts (achieved {achieved:.4})"
    )]
    PlacementExhausted { attempts: usize, achieved: f64 },

    #[error("crack simulation exceeded {max_steps} steps")]
    StepLimit {
        max_steps: usize,
        partial: Box<crate::prediction::CrackPath>,
    },

    #[error("training path inconsistent with geometry at step {step}: {reason}")]
    InconsistentPath { step: usize, reason: String },

    #[error("likelihood is not finite at any start")]
    NonFiniteLikelihood,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category used by the command-line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidPolygon { .. } | Error::InvalidMicrostructure(_) => "invalid-geometry",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Degenerate(_) => "degenerate",
            Error::Empty(_) => "empty-input",
            Error::PlacementExhausted { .. } => "placement-exhausted",
            Error::StepLimit { .. } => "step-limit",
            Error::InconsistentPath { .. } => "inconsistent-training-data",
            Error::NonFiniteLikelihood => "numerical",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
