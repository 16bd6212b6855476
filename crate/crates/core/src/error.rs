use thiserror::Error;

/// Errors raised by the numerical kernels and the simulation layers above them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigenvalue {value:e} is below the PSD clamp threshold")]
    NegativeEigenvalue { value: f64 },

    #[error("near-singular system in {op}")]
    NearSingular { op: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence in {op}: {detail}")]
    NoConvergence { op: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("trial {trial} failed: {source}")]
    Trial { trial: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
