use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the encmatch pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cat map period exceeds cap of {cap} iterations")]
    PeriodCapExceeded { cap: u64 },

    #[error("crop box {x},{y} {w}x{h} is invalid for a {img_w}x{img_h} image")]
    InvalidCrop {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        img_w: u32,
        img_h: u32,
    },

    #[error("noise budget exhausted ({bits:.3} bits left); decryption is unreliable")]
    NoiseBudgetExhausted { bits: f64 },

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("invalid submission at line {line}: {reason}")]
    Submission { line: usize, reason: String },

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

    #[error("encoding {path} failed: {source}")]
    Encoder {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that originate in the filesystem rather than in
    /// the data or configuration.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Image { source, .. } => matches!(source, image::ImageError::IoError(_)),
            Error::Encoder { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
