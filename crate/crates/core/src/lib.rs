//! Physically-based synthesis and evaluation of "soft effects" — haze, fog,
//! smoke, and generic semi-transparent occlusions — for building image
//! restoration training data.
//!
//! The crate is organized as a pipeline of small, pure modules:
//!
//! - [`raster`]: `f64` image buffers, sRGB transfer, bilinear resampling,
//!   PNG/PFM I/O.
//! - [`atmosphere`]: Beer–Lambert transmittance from visibility and depth,
//!   airlight compositing, and randomized presets for haze/fog/smoke.
//! - [`procedural`]: seeded gradient noise, turbulent flow fields, and
//!   path-blur advection for non-homogeneous media.
//! - [`supervision`]: random masks, boundary softening, strength-controlled
//!   target blending, and synthetic occlusions.
//! - [`metrics`]: the residual contrast gain no-reference metric.
//! - [`vlm`]: judge prompts, score parsing, and a retrying chat-completions
//!   client for VLM-based evaluation.
//! - [`sampler`]: balanced hierarchical sampling over dataset manifests.
//!
//! Everything is deterministic given explicit seeds; no global RNG state is
//! consulted anywhere.

pub mod atmosphere;
pub mod error;
pub mod metrics;
pub mod procedural;
pub mod raster;
pub mod sampler;
pub mod seed;
pub mod supervision;
pub mod vlm;

pub use error::{Error, Result};
pub use raster::{ColorTag, DepthMap, Raster};
