pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod report;
pub mod synth;

pub use error::{BenchError, ErrorClass, Result};
