pub mod checkpoint;
pub mod config;
pub mod contrastive;
pub mod data;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod mgcn;
pub mod optim;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
