//! Image-to-image translation lab built around hybrid convolution/attention
//! generators, a multi-scale patch discriminator, and an edge-aware loss.
//!
//! Everything runs on a small hand-rolled `f64` autodiff tape
//! ([`autograd`]), trading speed for bitwise-reproducible training at desk
//! scale. Models are functional: weights live in a [`params::ParamStore`]
//! and each forward pass binds them into a fresh graph.

pub mod adversarial;
pub mod aepl;
pub mod autograd;
pub mod blocks;
pub mod checkpoint;
pub mod config;
pub mod data;
mod error;
pub mod generator;
pub mod metrics;
pub mod params;
pub mod train;

pub use error::{Error, Result};
