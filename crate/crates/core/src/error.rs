use std::io;

use thiserror::Error;

/// Errors produced anywhere in the baking, rendering and coding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value out of range: {0}")]
    Range(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("capacity exceeded: {needed} occupied vertices do not fit in {available} pixels")]
    Capacity { needed: usize, available: usize },
    #[error(
        "frame {frame} alone occupies {occupied} vertices, above the pixel budget {theta}; \
         raise theta or lower the grid resolution"
    )]
    Overflow {
        frame: usize,
        occupied: usize,
        theta: usize,
    },
    #[error("coordinate {value} does not fit in {bits}-bit channels")]
    Depth { value: u32, bits: u32 },
    #[error("malformed data: {0}")]
    Format(String),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("frame {0} is not inside any loaded group")]
    Load(usize),
    #[error("external encoder unavailable: {0}")]
    Unavailable(String),
    #[error("fitting diverged at frame {frame}, iteration {iteration}: loss {loss}")]
    Divergence {
        frame: usize,
        iteration: usize,
        loss: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Short stable identifier used by the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Range(_) => "range",
            Error::Shape(_) => "shape",
            Error::Capacity { .. } => "capacity",
            Error::Overflow { .. } => "overflow",
            Error::Depth { .. } => "depth",
            Error::Format(_) => "format",
            Error::Checksum { .. } => "checksum",
            Error::Load(_) => "load",
            Error::Unavailable(_) => "unavailable",
            Error::Divergence { .. } => "divergence",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Image(_) => "image",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
