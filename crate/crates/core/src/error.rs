use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("malformed RLE: {0}")]
    MalformedRle(String),

    #[error("RLE decodes to {got} pixels but frame is {height}x{width}")]
    RleDimensionMismatch {
        got: u64,
        height: usize,
        width: usize,
    },

    #[error("invalid bounding box ({0}, {1}, {2}, {3})")]
    InvalidBox(f64, f64, f64, f64),

    #[error("observation for track {got} applied to track {expected}")]
    IdentityMismatch { expected: u32, got: u32 },

    #[error("unknown track id {0}")]
    UnknownTrackId(u32),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scene: {0}")]
    InvalidSpec(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("segmenter failure at frame {frame}: {message}")]
    Segmenter { frame: usize, message: String },

    #[error("adapter protocol violation: {0}")]
    Protocol(String),

    #[error("{0}")]
    EmptyInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad input data rather than bad usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
