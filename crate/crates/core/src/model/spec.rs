use serde::{Deserialize, Serialize};

use super::{Activation, Layer, LossKind, Network};
use crate::error::{Error, Result};
use crate::linalg::RngStream;

fn yes() -> bool {
    true
}

/// Declarative description of one layer; input sizes are inferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        outputs: usize,
        activation: Activation,
        #[serde(default = "yes")]
        bias: bool,
    },
    Conv {
        out_channels: usize,
        kernel: usize,
        activation: Activation,
        #[serde(default = "yes")]
        bias: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub loss: LossKind,
}

impl ModelSpec {
    /// Instantiates the network. `image` is `(channels, height, width)` of
    /// the input and is required when the first layer is a convolution.
    pub fn build(&self, input_dim: usize, image: Option<(usize, usize, usize)>, rng: &mut RngStream) -> Result<Network> {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut features = input_dim;
        let mut shape = image;
        for (i, spec) in self.layers.iter().enumerate() {
            match *spec {
                LayerSpec::Dense {
                    outputs,
                    activation,
                    bias,
                } => {
                    layers.push(Layer::dense(features, outputs, bias, activation, rng));
                    features = outputs;
                    shape = None;
                }
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    activation,
                    bias,
                } => {
                    let (c, h, w) = shape.ok_or_else(|| {
                        Error::config(format!("model.layers[{i}]"), "convolution needs an image-shaped input")
                    })?;
                    let layer = Layer::conv(c, out_channels, h, w, kernel, bias, activation, rng)
                        .map_err(|e| Error::config(format!("model.layers[{i}]"), e.to_string()))?;
                    features = layer.output_dim();
                    shape = Some((out_channels, h + 1 - kernel, w + 1 - kernel));
                    layers.push(layer);
                }
            }
        }
        Network::new(layers, self.loss).map_err(|e| Error::config("model", e.to_string()))
    }
}
