//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by state construction, channel application and the
/// estimation-theory routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode layout: {0}")]
    Layout(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cutoff too small: {reason} (required cutoff {required})")]
    CutoffTooSmall { reason: String, required: usize },

    #[error("truncated tail mass {mass:.3e} exceeds tolerance {tol:.3e}")]
    TruncationExceeded { mass: f64, tol: f64 },

    #[error("invalid probe specification: {0}")]
    InvalidProbe(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("state norm {0} outside tolerated range")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("degenerate operator family: {0}")]
    Degenerate(String),

    #[error("non-identifiable scenario: {0}")]
    NonIdentifiable(String),

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("infeasible query: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed state file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
