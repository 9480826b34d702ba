use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate landmarks")]
    DegenerateLandmarks,

    #[error("invalid landmarks: {0}")]
    InvalidLandmarks(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh topology mismatch")]
    TopologyMismatch,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("no eye shadow detected")]
    NoEyeShadow,

    #[error("too few samples: need {needed}, have {available}")]
    TooFewSamples { needed: usize, available: usize },

    #[error("dataset build failed: {successes} successful images, need {needed}; failures: {}", .failures.join("; "))]
    BuildFailed { successes: usize, needed: usize, failures: Vec<String> },

    #[error("model/db schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unsupported schema version in {path}: found {found}, supported {supported}")]
    VersionMismatch { path: PathBuf, found: String, supported: String },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

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
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    pub(crate) fn dims(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::DimensionMismatch { expected: expected.into(), actual: actual.into() }
    }
}
