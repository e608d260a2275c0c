use std::path::PathBuf;

use crate::resample::ReplicateMethod;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("covariance of component {component} is not positive definite")]
    DegenerateCovariance { component: usize },

    #[error("component {component} has effective mass {mass:.4}, below the minimum {minimum}")]
    EmptyCluster {
        component: usize,
        mass: f64,
        minimum: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no candidate model could be fitted")]
    NoModelFits,

    #[error("no {method} replicate could be fitted")]
    AllReplicatesFailed { method: ReplicateMethod },

    #[error("at least 2 fitted replicates are required, found {fitted}")]
    InsufficientReplicates { fitted: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unknown parameter slot `{0}`")]
    UnknownSlot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for the two failure modes EM reports as a degenerate fit rather
    /// than as a hard error.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::DegenerateCovariance { .. } | Error::EmptyCluster { .. }
        )
    }
}
