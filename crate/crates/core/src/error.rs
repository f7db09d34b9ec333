use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),
    #[error("argument outside the support: {0}")]
    Support(String),
    #[error("generator is singular at t = {0}")]
    Singular(f64),
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} is unavailable for this family")]
    Unavailable(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("degenerate quadrature: {0}")]
    DegenerateGrid(String),
    #[error("retraction left the positive definite cone")]
    StepTooLarge,
    #[error("synthetic data generation failed: {0}")]
    Generation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
