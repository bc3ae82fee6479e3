use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("homography is singular (|det| = {det:e})")]
    SingularTransform { det: f64 },

    #[error("not enough tracked points: need {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("degenerate point geometry: no valid minimal sample")]
    DegenerateGeometry,

    #[error("background motion undefined: no inlier correspondences")]
    UndefinedMotion,

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("not found: {0}")]
    NotFound(PathBuf),

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the input data or configuration rather than
    /// by the algorithms themselves.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::NotFound(_)
                | Error::Format(_)
                | Error::Config(_)
                | Error::Image(_)
                | Error::Io(_)
                | Error::InvalidDimensions { .. }
                | Error::DimensionMismatch { .. }
        )
    }
}
