//! Differentiable tensor primitives and the Adam optimizer.

mod adam;
mod graph;
pub mod ops;
mod scalar;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use graph::{Gradients, Graph, Primitive, Var};
pub use ops::{concat_channels, conv2d, l1_loss, relu, transposed_conv2d};
pub use scalar::Scalar;
pub use tensor::{Parameter, Tensor};
