use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("unsupported operation `{0}`: no gradient rule registered")]
    UnsupportedOp(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("insufficient frames: need {needed}, sequence has {available}")]
    InsufficientFrames { needed: usize, available: usize },

    #[error("missing temporal level {tl} in scene `{scene}`")]
    MissingTl { scene: String, tl: u32 },

    #[error("integrity check failed for {}: {reason}", path.display())]
    Integrity { path: PathBuf, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("version mismatch: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },

    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
