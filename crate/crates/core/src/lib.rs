//! Spatio-temporal graph forecasting with node-adaptive factorized parameters
//! and pattern-based transfer learning between road networks.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`data`]: dataset loading, normalization, windowing, splits and the
//!   synthetic cluster-structured generator.
//! - [`model`]: the forecasting network (adaptive TCN blocks, adaptive GCN,
//!   factorized per-node predictor) and its parameter set.
//! - [`training`]: loss, reverse-mode gradients, Adam, the epoch loop and
//!   checkpoints.
//! - [`transfer`]: K-means pattern distillation, the clustering regularizer,
//!   EMA center updates and target-domain fine-tuning.
//! - [`eval`]: RMSE/MAE/MAPE reports and the historical-average baseline.
//! - [`harness`]: configuration-driven experiment runs used by the CLI.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod data;
pub mod digest;
pub mod error;
pub mod eval;
pub mod harness;
pub mod model;
mod parallel;
pub mod rng;
pub mod tensor;
pub mod training;
pub mod transfer;

pub use error::{Error, Result};
pub use tensor::Tensor;
