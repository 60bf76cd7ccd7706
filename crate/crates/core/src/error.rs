use thiserror::Error;

/// Errors raised by the filtering library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("state became non-finite at step {step}")]
    BlowUp { step: usize },

    #[error("missing xi value for temporal index {k}, channel {l}")]
    MissingXi { k: u32, l: u32 },

    #[error("multi-index entry {count} exceeds the factorial guard of 20")]
    FactorialOverflow { count: u32 },

    #[error(
        "observation spacing {spacing:e} too coarse: need at least 8 samples per oscillation \
         of the fastest cosine (spacing <= delta/(8n) = {limit:e})"
    )]
    SpacingTooCoarse { spacing: f64, limit: f64 },

    #[error("degenerate normalization: |{value:e}| below floor {floor:e}")]
    DegenerateNormalization { value: f64, floor: f64 },

    #[error("negative variance {value:e} at step {step}; reduce the time step")]
    NegativeVariance { step: usize, value: f64 },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
