//! Experiment harness for generative compressed sensing with subsampled
//! unitary measurements.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod stats;

pub use error::{HarnessError, Result};
