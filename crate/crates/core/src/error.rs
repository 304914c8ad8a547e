use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("volume error: {0}")]
    Volume(String),

    #[error("light singularity: evaluation point coincides with the light position")]
    LightSingularity,

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    /// Whether this error stems from unreadable or malformed user input (exit code 1).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Volume(_) | Error::LightSingularity)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
