use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data, file or configuration.
    Input,
    /// A computation failed on otherwise valid input.
    Computation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected a {expected}-channel image, got {actual} channels")]
    ChannelMismatch { expected: u8, actual: u8 },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("image {width}x{height} is too small: {what} needs at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
        what: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("feature {index} has negative value {value}")]
    NegativeFeature { index: usize, value: f64 },

    #[error("SMO did not converge after {iterations} iterations (best KKT violation {violation:.3e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("probability matrices are misaligned: {0}")]
    Misaligned(String),

    #[error("invalid probability data: {0}")]
    InvalidProbabilities(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fingerprint mismatch in {path}: declared {declared}, recomputed {recomputed}")]
    FingerprintMismatch {
        path: PathBuf,
        declared: String,
        recomputed: String,
    },

    #[error("empty class folder {0}")]
    EmptyClassFolder(PathBuf),

    #[error("missing path {0}")]
    MissingPath(PathBuf),

    #[error("cannot decode image {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotConverged { .. } => ErrorKind::Computation,
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
