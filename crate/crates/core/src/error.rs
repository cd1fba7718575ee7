use thiserror::Error;

/// Errors raised by the fitting, sampling and testing routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GofError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:.3e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {lambda_min:.3e})")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error("matrix is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("not enough observations: need at least {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("zero denominator in scatter iteration (row {row})")]
    ZeroDenominator { row: usize },

    #[error("all radii are zero; scale is not identifiable")]
    DegenerateRadii,

    #[error("{failed} of {total} bootstrap replicates failed to fit (last error: {last})")]
    BootstrapFailure {
        failed: usize,
        total: usize,
        last: String,
    },
}

pub type Result<T> = std::result::Result<T, GofError>;
