//! Reverse-mode differentiation engine with the layer and optimizer set
//! needed by the generator, discriminator and surrogate classifier.

pub mod adam;
pub mod conv;
pub mod element;
pub mod gradcheck;
pub mod graph;
pub mod params;
pub mod rng;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use element::Element;
pub use gradcheck::{grad_check, grad_check_params};
pub use graph::{Activation, Graph, Mode, RunningStats, Var};
pub use params::{init_params, BufferSet, ParamKind, ParamSet, ParamSpec};
pub use rng::{RngState, RngStream};
pub use tensor::Tensor;
