//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value violates a representation invariant (bad box extents, FoV
    /// out of range, ...).
    #[error("validation: {0}")]
    Validation(String),

    /// An input is outside an operation's mathematical domain (zero vector,
    /// tangent plane asked to cover >= 180 degrees, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// Raster dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// A text annotation file failed to parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// The external tracker adapter failed (crash, timeout, nonzero exit).
    #[error("adapter: {0}")]
    Adapter(String),

    /// The adapter replied with something the wire protocol does not allow.
    #[error("adapter protocol: {0}")]
    Protocol(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Process exit code for the CLI: 2 for input/validation problems,
    /// 3 for adapter/runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Adapter(_) | Error::Protocol(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
