//! Rice crop-extent mapping pipeline.
//!
//! Config-driven workflow over projected multi-band rasters: seasonal
//! compositing and spectral indices, weak-label construction (k-means +
//! reference land cover + digitized paddies), stratified sampling and record
//! serialization, from-scratch DNN and depthwise-separable U-Net training,
//! tiled map inference, and the full evaluation suite (metrics, agreement
//! maps, acreage vs survey, independent point validation).
//!
//! The `parallel` feature (default) fans data-parallel inner loops out over
//! rayon; without it everything runs sequentially. Results are bit-identical
//! either way: reductions always happen in a fixed order.

pub mod error;
pub mod par;
pub mod rng;

pub mod features;
pub mod infer;
pub mod nn;
pub mod raster;
pub mod stratify;
pub mod synth;

pub use error::{Error, Result};
