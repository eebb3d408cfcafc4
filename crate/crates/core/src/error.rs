use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension {0}: must be at least 1")]
    EmptyDimension(usize),

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("codebook is empty")]
    EmptyCodebook,

    #[error("codeword {index} has norm {norm}, expected unit norm")]
    NonUnitVector { index: usize, norm: f64 },

    #[error("codebook is not a tight frame (max deviation {max_deviation:e})")]
    NotTight { max_deviation: f64 },

    #[error("beam assignment is not injective: beam {beam} used twice")]
    NonInjective { beam: usize },

    #[error("beam index {beam} out of range for codebook of size {size}")]
    BeamOutOfRange { beam: usize, size: usize },

    #[error("{scheduled} users scheduled but at most {limit} allowed")]
    TooManyScheduled { scheduled: usize, limit: usize },

    #[error("user {0} is not part of the input")]
    MissingUser(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("problem too large for exhaustive search ({0}); use the greedy scheduler")]
    TooLarge(String),

    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
