//! Energy-aware computation offloading for mobile devices served by an edge
//! server over a velocity-modulated uplink.
//!
//! - [`model`]: local and offload time/energy of a partially offloaded task.
//! - [`spectral`]: spectral efficiency as a function of speed and carrier frequency.
//! - [`greedy`]: iterative greedy search over offloading ratios.
//! - [`features`]: datasets, min-max scaling and mutual-information ranking.
//! - [`cluster`]: k-means segmented linear predictor of task energy.
//! - [`datagen`]: random scenarios, optimised-task datasets and GPS speed extraction.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod datagen;
pub mod error;
pub mod features;
pub mod greedy;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
