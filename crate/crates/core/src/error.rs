//! Error type shared by the whole crate.
//!
//! Errors are grouped so the CLI can map them onto its exit-code contract:
//! configuration and I/O problems exit with 2, numerical problems with 3.

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Matrix or vector dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// An input violates a documented precondition (e.g. a matrix that
    /// should be symmetric or unitary is not, beyond tolerance).
    #[error("contract violation: {0}")]
    Contract(String),
    /// An iterative routine failed to produce a usable result
    /// (bracket failure, singular system, non-finite values).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// File system problem, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Config file or result table could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    /// LAPACK/BLAS backend failure.
    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

impl Error {
    /// Exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidConfig(_) | Error::Io { .. } | Error::Parse(_) => 2,
            Error::Dimension(_) | Error::Contract(_) | Error::Numerical(_) | Error::Linalg(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
