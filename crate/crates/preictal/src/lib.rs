//! File formats, experiment configuration and the command-line driver built
//! on `preictal-core`.

pub use preictal_core as core;

pub mod chbmit;
pub mod checkpoint;
pub mod config;
pub mod convert;
pub mod edf;
mod error;
pub mod exec;
pub mod manifest;
pub mod raw;
pub mod report;
pub mod run;
pub mod synth;

pub use error::{Error, Result};
