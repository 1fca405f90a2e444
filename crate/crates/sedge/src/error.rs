use std::path::PathBuf;

/// Errors produced by the sedge library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or out-of-range input to an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Bad configuration file or option combination.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem trouble, annotated with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Image decode/encode failure.
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },

    /// Corrupt or unrecognized model file.
    #[error("model format error: {0}")]
    Format(String),

    /// Model and data (or options) disagree, e.g. channel counts.
    #[error("model/data mismatch: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 i/o, 4 data/model mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Image { .. } => 3,
            Error::Format(_) | Error::Mismatch(_) => 4,
            Error::InvalidInput(_) => 2,
        }
    }
}
