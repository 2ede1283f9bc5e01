use std::io;

use thiserror::Error;

/// Errors of the bundling, serving and command-line layer.
#[derive(Debug, Error)]
pub enum StreamError {
    #[error(transparent)]
    Core(#[from] videorf_core::Error),
    #[error("bundle incomplete: {0}")]
    Bundle(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl StreamError {
    pub fn kind(&self) -> &'static str {
        match self {
            StreamError::Core(e) => e.kind(),
            StreamError::Bundle(_) => "bundle",
            StreamError::Manifest(_) => "manifest",
            StreamError::Usage(_) => "usage",
            StreamError::Io(_) => "io",
            StreamError::Json(_) => "json",
        }
    }
}

pub type Result<T, E = StreamError> = std::result::Result<T, E>;
