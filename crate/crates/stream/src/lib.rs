//! Bundling, manifest, HTTP streaming service and command-line front end for
//! streamable radiance-field sequences.

pub mod bundle;
pub mod cli;
pub mod error;
pub mod manifest;
pub mod range;
pub mod server;

pub use error::{Result, StreamError};
