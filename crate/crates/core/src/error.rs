use thiserror::Error;

/// Errors produced by the estimators, tests and helpers in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e}, floor {floor:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, floor: f64 },

    #[error("underdetermined: n = {n} must exceed p = {p}")]
    Underdetermined { n: usize, p: usize },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("Walsh average of rows {i} and {j} is exactly zero")]
    DegenerateWalshAverage { i: usize, j: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
