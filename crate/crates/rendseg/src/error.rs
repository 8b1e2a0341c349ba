use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("corrupt mask: {0}")]
    CorruptMask(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    TrainingDiverged { step: usize, loss: f64 },

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("unknown class name {name:?} at {path}")]
    UnknownClass { name: String, path: String },

    #[error("unsupported region shape {shape:?} at {path}")]
    UnsupportedShape { shape: String, path: String },

    #[error("unsupported image format (magic bytes {magic:02x?}) in {path}")]
    UnsupportedImageFormat { magic: Vec<u8>, path: PathBuf },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
