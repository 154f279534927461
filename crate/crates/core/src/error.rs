use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("matrix is ill-conditioned: smallest eigenvalue {min_eig:e} is below floor {floor:e}")]
    IllConditioned { min_eig: f64, floor: f64 },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("parameter {value} is outside [0, 1]")]
    OutOfRange { value: f64 },

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("cluster sizes sum to {got}, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("k = {k} is invalid for a collection of {n} measures")]
    KTooLarge { k: usize, n: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid collection: {0}")]
    InvalidCollection(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("periods {first:?} and {second:?} overlap")]
    OverlappingPeriods { first: String, second: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error came from floating-point trouble rather than bad input
    /// or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalBreakdown(_)
                | Error::MaxIterExceeded { .. }
                | Error::IllConditioned { .. }
                | Error::NotSpd(_)
                | Error::NonFinite
        )
    }
}
