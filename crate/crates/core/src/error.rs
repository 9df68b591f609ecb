use std::path::PathBuf;

use thiserror::Error;

use crate::raster::PixelCoord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode image {path}: {message}")]
    ImageDecode { path: PathBuf, message: String },

    #[error("unsupported image format in {path}: {message}")]
    UnsupportedImage { path: PathBuf, message: String },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("pixel ({}, {}) lies outside a {width}x{height} grid", .coord.x, .coord.y)]
    OutOfBounds {
        coord: PixelCoord,
        width: usize,
        height: usize,
    },

    #[error("pixels ({}, {}) and ({}, {}) are not 4-neighbors", .u.x, .u.y, .v.x, .v.y)]
    NotAdjacent { u: PixelCoord, v: PixelCoord },

    #[error("pixel ({}, {}) has not been finalized by the solver", .0.x, .0.y)]
    NotFinalized(PixelCoord),

    #[error("start pixel ({}, {}) is not foreground", .0.x, .0.y)]
    StartNotForeground(PixelCoord),

    #[error("invalid sample set: {0}")]
    Samples(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("classifier failure: {0}")]
    Classifier(String),

    #[error("cannot generate scene: {0}")]
    Scene(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True when the error comes from bad input data rather than a failure of
    /// the computation itself.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Diverged(_) | Error::Classifier(_))
    }
}
