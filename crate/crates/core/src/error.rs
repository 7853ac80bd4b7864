//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the library.
///
/// The variants are grouped by how a caller should react: `Dimension`,
/// `Validation` and `Parse` indicate a bad request or malformed input;
/// `Data` and `Assumption` indicate that structurally valid data violates a
/// condition of the requested computation (disconnected graph, zero variance,
/// non-positive-definite metric); `Convergence` indicates an iterative solver
/// ran out of iterations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Validation(format!("csv error: {other:?}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
