use thiserror::Error;

/// Errors produced by grid construction, factorizations and the Schwarz solvers.
#[derive(Debug, Error)]
pub enum DdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: pivot {pivot:e} at row {row}")]
    SingularMatrix { row: usize, pivot: f64 },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("local Newton on subdomain {subdomain} did not converge in {iterations} iterations (residual {residual:e})")]
    LocalSolveFailed {
        subdomain: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("coarse Newton did not converge in {iterations} iterations (residual {residual:e})")]
    CoarseSolveFailed { iterations: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DdError>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(DdError::DimensionMismatch { expected, got });
    }
    Ok(())
}
