//! Multi-baseline SAR tomography toolkit.
//!
//! The crate covers the whole chain from acquisition geometry to evaluated
//! point clouds:
//!
//! - [`geometry`]: baselines, elevation grid, steering matrix, synthetic
//!   scenes and noisy observations.
//! - [`solvers`]: complex soft-thresholding, ISTA and FISTA per cell.
//! - [`diffengine`]: a small reverse-mode differentiation engine over real and
//!   complex tensors.
//! - [`network`]: the unrolled reconstruction network (shrinkage pre-imaging,
//!   convolutional encoder/decoder over azimuth-elevation slices, shrinkage
//!   final imaging).
//! - [`training`]: slice datasets, the staged composite loss and the
//!   optimisation loop.
//! - [`evaluation`]: point-cloud extraction and accuracy / completeness /
//!   outlier metrics.
//! - [`archive`] and [`cli`]: the on-disk tensor archive and the command
//!   implementations behind the `tomosar` binary.

pub mod archive;
pub mod cli;
pub mod diffengine;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod linalg;
pub mod network;
pub mod parallel;
pub mod solvers;
pub mod training;
pub mod volume;

pub use error::{Error, Result};
pub use linalg::C64;
pub use volume::ComplexVolume;
