//! Feed-forward networks with full and truncated backpropagation.

mod checkpoint;
mod gradcheck;
mod layer;
mod network;
mod spec;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::Tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, GradCheckReport, GRADCHECK_TOL};
pub use layer::{Activation, Conv2d, Dense, Layer, LayerKind};
pub use network::{suffix_start, Network, PROB_FLOOR};
pub use spec::{LayerSpec, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Weight,
    Bias,
}

/// Address of one parameter block: a layer's weight matrix or bias vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId {
    pub layer: usize,
    pub role: Role,
}

impl ParamId {
    pub fn weight(layer: usize) -> Self {
        Self {
            layer,
            role: Role::Weight,
        }
    }

    pub fn bias(layer: usize) -> Self {
        Self {
            layer,
            role: Role::Bias,
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            Role::Weight => "weight",
            Role::Bias => "bias",
        };
        write!(f, "layer{}.{role}", self.layer)
    }
}

/// Gradient per parameter block.
pub type Gradients = BTreeMap<ParamId, Tensor>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Fused with a softmax output layer.
    CrossEntropy,
    MeanSquaredError,
}

/// One minibatch: inputs `B×d` and targets `B×C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub targets: Tensor,
}

impl Batch {
    pub fn new(inputs: Tensor, targets: Tensor) -> Self {
        Self { inputs, targets }
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fraction of rows whose arg-max matches `labels`.
pub fn accuracy(outputs: &Tensor, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = (0..outputs.rows())
        .filter(|&r| {
            let row = outputs.row(r);
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0;
            best == labels[r]
        })
        .count();
    hits as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests;
