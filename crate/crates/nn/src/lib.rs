//! Stage-2 learning: a small reverse-mode tape, the dilated-convolution
//! network and the constrained weighted recombination built on top of it.

pub mod error;
pub mod features;
pub mod network;
pub mod optim;
pub mod report;
pub mod tape;
pub mod wr;

pub use error::{NnError, Result};
pub use network::{Architecture, NetInput, Network, NetworkConfig};
pub use optim::Adam;
pub use report::{report_weight_distributions, Distribution, Histogram, Summary, WeightReport};
pub use tape::{Tape, Tensor, Var};
pub use wr::{
    combine, normalize_weights, train_model, weight_interval, wr_predict, wr_train, AlphaConfig, Example, ModelKind,
    ModelMeta, TrainConfig, TrainHistory, WrModel, WrOutput,
};
