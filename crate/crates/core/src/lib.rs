//! Seizure-prediction pipeline core.
//!
//! Everything in this crate is pure computation over in-memory data:
//! preictal/interictal labeling and leave-one-seizure-out partitioning,
//! STFT and the other window transforms, a small reverse-mode autodiff engine
//! with the layers the six architectures need, training loops, AUC metrics and
//! the window-size × PPL grid search. File formats, configuration and the CLI
//! live in the `preictal` crate.
#![cfg_attr(not(feature = "std"), no_std)]
// NaN inputs must fail validation, so `!(x > 0.0)` is intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autodiff;
pub mod dsp;
mod error;
pub mod models;
pub mod recording;
pub mod rng;
pub mod scalar;
pub mod segmentation;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
