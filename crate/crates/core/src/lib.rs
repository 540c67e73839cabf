//! Auxiliary-classifier GAN laboratory: a small differentiation engine,
//! the AC-GAN objective and training loop, a surrogate judge classifier,
//! and the evaluation metrics used to study sample quality and diversity.

pub mod acgan;
pub mod classifier;
pub mod container;
pub mod data;
pub mod error;
pub mod imageio;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod nn;

pub use error::{Error, Result};
