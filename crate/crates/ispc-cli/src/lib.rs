//! IO, file formats, fixtures, and rendering around the `ispc-core`
//! pipeline. The `ispc` binary in this crate wires everything into the
//! encode/segment/evaluate/corrupt/synth/render workflows.

pub mod config;
pub mod error;
pub mod format;
pub mod render;
pub mod synth;

pub use error::{CliError, Result};
