//! Adaptive scenario discovery for crowd counting.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense tensors, a tape-based reverse-mode autodiff graph, SGD and
//!   finite-difference gradient checks.
//! - [`density`]: ground-truth density maps from head annotations (geometry-adaptive
//!   or fixed Gaussian kernels) and count-preserving resampling.
//! - [`model`]: the two-pathway counting network with an adaption branch whose
//!   normalized, discretized response weights the pathways.
//! - [`train`]: end-to-end SGD on the halved squared density error, plus MAE/RMSE.
//! - [`harness`]: synthetic crowds, scenario reports, the ablation driver and the
//!   command implementations used by the `asd` binary.
//!
//! Interchangeable algorithms (pathway fusion strategies, kernel width rules,
//! gradient checks) live behind traits and are looked up by name in registries so
//! configs and the CLI can pick them at runtime.

pub mod density;
pub mod error;
pub mod harness;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{AsdError, Result};
