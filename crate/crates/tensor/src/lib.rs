//! Dense `f64` tensors with a tape-based reverse-mode differentiator.
//!
//! Every operation checks its result for NaN/Inf and reports a
//! [`TensorError::NonFinite`] instead of letting it propagate. Reductions
//! accumulate in a fixed row-major order, so identical inputs produce
//! bit-identical outputs.

mod error;
pub mod gradcheck;
mod graph;
pub mod io;
pub mod ops;
mod rng;
mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{Grads, Graph, Unary, Var};
pub use ops::basic::sigmoid;
pub use ops::conv::ConvGeom;
pub use ops::pool::{adaptive_bins, linear_taps, PoolKind, Tap};
pub use rng::RngState;
pub use tensor::{broadcast_shape, numel, offset, strides, Tensor};
