//! Streamable dynamic radiance fields: per-frame sparse volumes baked into
//! codec-friendly 2D feature images through Morton-ordered mapping tables,
//! rendered with a deferred volumetric renderer and a tiny shared MLP.

pub mod bench;
pub mod checkpoint;
pub mod codec;
pub mod color;
pub mod error;
pub mod feature;
pub(crate) mod io;
pub mod mapping;
pub mod math;
pub mod morton;
pub mod occupancy;
pub mod pipeline;
pub mod render;
pub mod scene;
pub mod train;
pub mod volume;

pub use error::{Error, Result};
