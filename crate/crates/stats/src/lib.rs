//! Statistical building blocks for the first stage: classical forecasters,
//! loess and STL, gradient-boosted trees, the FFORMA baseline combiner and the
//! promotion/festival component estimators.

pub mod causal;
pub mod classical;
pub mod error;
pub mod fforma;
pub mod gbdt;
pub mod loess;
pub mod stl;

pub use error::{Result, StatsError};
