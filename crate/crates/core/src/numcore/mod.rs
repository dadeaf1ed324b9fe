//! Dense `f64` tensors, reverse-mode autodiff, and the Adam optimizer.

mod adam;
mod attention;
pub mod checkpoint;
pub mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use attention::{scaled_dot_attention, Attention};
pub use graph::{Gradients, Graph, Var, MASK_BIAS};
pub use params::{BoundParams, ParamGrads, ParamStore};
pub use tensor::Tensor;
