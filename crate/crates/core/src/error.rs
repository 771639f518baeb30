use std::path::PathBuf;

use crate::image::Shape;

/// Errors produced by the enhancement library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape {0:?}: expected 2 or 3 axes, each at least 1")]
    InvalidShape(Vec<usize>),

    #[error("data length {actual} does not match shape volume {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Shape, right: Shape },

    #[error("dimensionality mismatch: expected {expected}D, got {actual}D")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("ROC undefined: {0}")]
    DegenerateTruth(&'static str),

    #[error("threshold grids differ between ROC results")]
    GridMismatch,

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {message}")]
    Codec { path: PathBuf, message: String },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short stable identifier for the error class, used in machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidShape(_) | Error::LengthMismatch { .. } => "invalid_shape",
            Error::NonFinite(_) => "non_finite",
            Error::ShapeMismatch { .. } | Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter { .. } => "invalid_params",
            Error::Empty(_) => "empty_input",
            Error::DegenerateTruth(_) => "degenerate_truth",
            Error::GridMismatch => "grid_mismatch",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::Io { .. } => "io",
            Error::Codec { .. } => "codec",
            Error::Json { .. } => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
