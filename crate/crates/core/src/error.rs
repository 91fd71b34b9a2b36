use std::path::PathBuf;

/// Errors produced by the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PNG {path}: {message}")]
    MalformedPng { path: PathBuf, message: String },

    #[error("unsupported image format in {path}: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image too small: {0}")]
    TooSmall(String),

    #[error("unknown instance id {0}")]
    UnknownInstance(u16),

    #[error("instance {0} has no co-occurring pixel pairs")]
    NoPairs(u16),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("csv error in {context}: {message}")]
    Csv { context: String, message: String },

    #[error("json error in {context}: {message}")]
    Json { context: String, message: String },

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
