//! Multirate training of feed-forward networks: partitioned SGD with
//! momentum where parameter groups are updated on different timescales.

pub mod analysis;
pub mod cost;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod partition;
mod serde_util;

pub use cost::CostCounters;
pub use error::{Error, Result};
