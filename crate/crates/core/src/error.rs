use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two operands disagree on shape.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numeric or count argument is out of its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Frames handed to the memory bank out of order.
    #[error("sequence error: {0}")]
    Sequence(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed or unusable input data (images, annotations, weight files).
    #[error("input error: {0}")]
    Input(String),

    /// Inconsistent dataset layout (missing frames, mismatched lengths).
    #[error("dataset error: {0}")]
    Dataset(String),

    /// An internal invariant was broken; always a bug in the caller or the engine.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line driver: 1 for bad input, 2 for
    /// internal contract violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Frame { source, .. } => source.exit_code(),
            Error::Dimension(_) | Error::Contract(_) | Error::Sequence(_) => 2,
            _ => 1,
        }
    }
}
