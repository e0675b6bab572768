use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the stylization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported audio in {path}: {reason}")]
    UnsupportedAudio { path: PathBuf, reason: String },

    #[error("unsupported image in {path}: {reason}")]
    UnsupportedImage { path: PathBuf, reason: String },

    #[error("waveform has {len} samples, shorter than one analysis window of {window}")]
    WaveformTooShort { len: usize, window: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("cannot normalize a zero-length vector")]
    ZeroVector,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("no mask pixel exceeds the center threshold {threshold} (max probability {max})")]
    NoQualifyingCenters { threshold: f64, max: f64 },

    #[error("malformed parameter file: {0}")]
    ParamFormat(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{failed} of {total} self-test checks failed")]
    SelfTestFailed { failed: usize, total: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
