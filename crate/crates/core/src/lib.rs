pub mod augment;
pub mod bfv;
pub mod chaos;
pub mod dataset;
pub mod error;
pub mod evalkit;
pub mod pipeline;
pub mod raster;
pub mod samples;
pub mod seed;
pub mod selftest;
pub mod synth;

pub use error::{Error, Result};
