//! Streaming multi-zone speech separation for car cabins.

pub mod augment;
pub mod dsp;
mod error;
pub mod features;
pub mod irlab;
pub mod metrics;
pub mod model;
pub mod mvdr;
pub mod pipeline;
pub mod run;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
