//! Reverse-mode differentiation over real and complex tensors.
//!
//! Only the operators the reconstruction network needs are provided. Feature
//! maps are laid out `(channels, elevation, azimuth)`.

mod graph;
pub mod gradcheck;
pub mod kernels;
mod tensor;

pub use graph::{Graph, ResizeMode, Var};
pub use tensor::{DType, Data, Tensor};
