use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Variants group into the process exit classes used by the `msdn` binary
/// (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("bad magic {found:?}, expected \"ZSLD\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported container version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("truncated container while reading {what}")]
    Truncated { what: String },

    #[error("malformed container: {0}")]
    Malformed(String),

    #[error("missing tensor {0:?}")]
    MissingTensor(String),

    #[error("dataset invalid: {}", .0.join("; "))]
    InvalidDataset(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("gradient check failed: {0}")]
    Gradient(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 usage/argument, 3 data, 4 numeric, 5 shape, 6 gradient.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Io { .. } => 2,
            Error::BadMagic { .. }
            | Error::Version { .. }
            | Error::Truncated { .. }
            | Error::Malformed(_)
            | Error::MissingTensor(_)
            | Error::InvalidDataset(_) => 3,
            Error::Numeric(_) | Error::NonFiniteLoss { .. } => 4,
            Error::Shape { .. } => 5,
            Error::Gradient(_) => 6,
        }
    }
}
