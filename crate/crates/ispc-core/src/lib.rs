//! Instance segmentation decoding from dense per-pixel channels.
//!
//! The input is a [`scene::ChannelTriple`]: a semantic label map, a quantized
//! depth-class map, and a per-pixel score vector over discretized directions
//! toward the owning instance's visible center. From that, the pipeline
//! recovers a continuous direction field, correlates it against ideal
//! center-pattern templates per semantic category and depth class, extracts
//! instance centers by non-maximum suppression, assigns pixels to centers,
//! fuses biased partial proposals, and emits a holistic labeling with
//! per-instance depth. A ground-truth encoder, a seeded channel-corruption
//! simulator, and the full evaluation metric suite close the loop without a
//! trained network.
//!
//! The crate is `no_std` (alloc required); IO, file formats, and the CLI live
//! in the companion `ispc-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corrupt;
pub mod direction;
pub mod encode;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod template;

pub use error::{Error, Result};
pub use raster::{PixelCoord, Raster};
pub use scene::{ChannelTriple, DepthLayering, DirectionBinning, LabelSet};
