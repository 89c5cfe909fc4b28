use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("Toeplitz moment matrix is not positive definite at order {order} (pivot {pivot:e})")]
    NotPositiveDefinite { order: usize, pivot: f64 },

    #[error("Verblunsky coefficient |alpha_{index}| = {value} is not inside (-1, 1)")]
    VerblunskyOutOfRange { index: usize, value: f64 },

    #[error(
        "quadrature did not converge: value {value}, error estimate {err:e} > tolerance {tol:e}"
    )]
    NoConvergence { value: f64, err: f64, tol: f64 },

    #[error("overflow while evaluating {0}")]
    Overflow(String),

    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),

    #[error("eigenvalue solver failed: {0}")]
    Eigen(String),

    #[error("Monte Carlo failure rate too high: {failed} of {total} samples failed")]
    SampleFailures { failed: usize, total: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
