//! Crate-wide error type with the exit-code taxonomy used by the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments or configuration (exit code 1).
    #[error("usage error: {0}")]
    Usage(String),
    /// Malformed or missing data files, dimension mismatches (exit code 2).
    #[error("data error: {0}")]
    Data(String),
    /// Numerical failure: non-finite values, step underflow, divergence
    /// (exit code 3).
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Data(_) | Error::Io(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
