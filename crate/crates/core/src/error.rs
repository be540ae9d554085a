use std::path::PathBuf;

/// Errors produced by the solvers, analysis routines and file readers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("row {0} has zero norm")]
    ZeroRow(usize),

    #[error("zero matrix: no singular value above the rank cutoff")]
    ZeroMatrix,

    #[error("zero residual: dynamic range is undefined")]
    ZeroResidual,

    #[error("inconsistent system: residual norm {residual:e} exceeds tolerance {tolerance:e}")]
    Inconsistent { residual: f64, tolerance: f64 },

    #[error("{count} subsets exceed the enumeration limit of {limit}")]
    TooManySubsets { count: f64, limit: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
