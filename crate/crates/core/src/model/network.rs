use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::layer::{Activation, Layer};
use super::{Gradients, LossKind, ParamId, Role};
use crate::cost::CostCounters;
use crate::error::{Error, Result};
use crate::linalg::{RngStream, Tensor};

/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Default)]
struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Tensor>,
    /// Post-activation output of each layer.
    outputs: Vec<Tensor>,
    /// im2col buffers for convolution layers.
    cols: Vec<Option<Tensor>>,
}

/// Feed-forward stack of affine/convolution layers with a loss head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    loss: LossKind,
    #[serde(skip)]
    cache: Option<ForwardCache>,
    /// Visit and FLOP counts accumulated by `forward`/`backward_*`.
    #[serde(default)]
    pub counters: CostCounters,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.loss == other.loss
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>, loss: LossKind) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} emits {} features but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        let last = layers.len() - 1;
        for (i, layer) in layers.iter().enumerate() {
            if layer.activation == Activation::Softmax && i != last {
                return Err(Error::Contract(format!(
                    "softmax is only allowed on the output layer (found on layer {i})"
                )));
            }
        }
        let out_act = layers[last].activation;
        match loss {
            LossKind::CrossEntropy if out_act != Activation::Softmax => {
                return Err(Error::Contract("cross-entropy requires a softmax output layer".into()))
            }
            LossKind::MeanSquaredError if out_act == Activation::Softmax => {
                return Err(Error::Contract("softmax output is only supported with cross-entropy".into()))
            }
            _ => {}
        }
        Ok(Self {
            layers,
            loss,
            cache: None,
            counters: CostCounters::default(),
        })
    }

    /// Dense network with `sizes.len() - 1` layers, each with a bias.
    pub fn mlp(sizes: &[usize], activations: &[Activation], loss: LossKind, rng: &mut RngStream) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::Shape(format!(
                "{} sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Layer::dense(w[0], w[1], true, act, rng))
            .collect();
        Self::new(layers, loss)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.cache = None;
        &mut self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Every parameter block, in layer order, weight before bias.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            ids.push(ParamId::weight(i));
            if layer.bias().is_some() {
                ids.push(ParamId::bias(i));
            }
        }
        ids
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        let layer = self.layers.get(id.layer)?;
        match id.role {
            Role::Weight => Some(layer.weight()),
            Role::Bias => layer.bias(),
        }
    }

    pub fn param_mut(&mut self, id: ParamId) -> Option<&mut Tensor> {
        let layer = self.layers.get_mut(id.layer)?;
        match id.role {
            Role::Weight => Some(layer.weight_mut()),
            Role::Bias => layer.bias_mut(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.param_ids().iter().map(|&id| self.param(id).map_or(0, Tensor::len)).sum()
    }

    /// All parameters concatenated in `param_ids` order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for id in self.param_ids() {
            out.extend_from_slice(self.param(id).expect("registered").data());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for id in self.param_ids() {
            let p = self.param_mut(id).expect("registered");
            let n = p.len();
            p.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        self.cache = None;
        Ok(())
    }

    /// Same architecture: identical layer kinds and parameter shapes.
    pub fn same_architecture(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self.loss == other.loss
            && self.param_ids() == other.param_ids()
            && self.param_ids().iter().all(|&id| {
                self.param(id).map(Tensor::shape) == other.param(id).map(Tensor::shape)
            })
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.activation == b.activation && a.input_dim() == b.input_dim())
    }

    /// Forward pass that caches activations for a following backward pass
    /// and counts one forward visit per layer.
    pub fn forward(&mut self, inputs: &Tensor) -> Result<Tensor> {
        let mut cache = ForwardCache::default();
        let mut x = inputs.clone();
        for layer in &self.layers {
            let (mut z, cols) = layer.affine(&x, Some(&mut self.counters))?;
            layer.activation.apply(&mut z);
            self.counters.forward_layer_visits += 1;
            cache.inputs.push(x);
            cache.cols.push(cols);
            x = z;
            cache.outputs.push(x.clone());
        }
        self.cache = Some(cache);
        Ok(x)
    }

    /// Uncounted, uncached evaluation for metrics.
    pub fn predict(&self, inputs: &Tensor) -> Result<Tensor> {
        let mut x = inputs.clone();
        for layer in &self.layers {
            let (mut z, _) = layer.affine(&x, None)?;
            layer.activation.apply(&mut z);
            x = z;
        }
        Ok(x)
    }

    /// Drops the activation cache, e.g. after parameters changed.
    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    /// Exact gradients for every parameter. Costs one backward visit per layer.
    pub fn backward_full(&mut self, targets: &Tensor) -> Result<Gradients> {
        self.backward_from(targets, 0)
    }

    /// Gradients for a contiguous final suffix of layers only. Upstream
    /// propagation stops at the first suffix layer, so the cost is one visit
    /// per suffix layer; the returned values equal `backward_full`'s on the
    /// same blocks bit for bit.
    pub fn backward_truncated(&mut self, targets: &Tensor, fast_suffix: &BTreeSet<usize>) -> Result<Gradients> {
        let first = suffix_start(fast_suffix, self.layers.len())?;
        self.backward_from(targets, first)
    }

    /// Backward pass over layers `first..L`.
    pub(crate) fn backward_from(&mut self, targets: &Tensor, first: usize) -> Result<Gradients> {
        let Network {
            layers,
            loss,
            cache,
            counters,
        } = self;
        let cache = cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        let n = layers.len();
        let mut grads = BTreeMap::new();
        if first >= n {
            return Ok(grads);
        }
        let out = &cache.outputs[n - 1];
        if targets.shape() != out.shape() {
            return Err(Error::Shape(format!(
                "targets {:?} do not match outputs {:?}",
                targets.shape(),
                out.shape()
            )));
        }
        let batch = out.rows() as f64;
        let mut delta = out.zip_map(targets, |o, y| (o - y) / batch)?;
        if *loss == LossKind::MeanSquaredError {
            layers[n - 1].activation.backprop(&mut delta, out)?;
        }
        for l in (first..n).rev() {
            let want_input = l > first;
            let g = layers[l].backward(&delta, &cache.inputs[l], cache.cols[l].as_ref(), want_input, counters)?;
            counters.backward_layer_visits += 1;
            grads.insert(ParamId::weight(l), g.weight);
            if let Some(gb) = g.bias {
                grads.insert(ParamId::bias(l), gb);
            }
            if let Some(mut dx) = g.input {
                layers[l - 1].activation.backprop(&mut dx, &cache.outputs[l - 1])?;
                delta = dx;
            }
        }
        Ok(grads)
    }

    /// Mean loss over the batch (uncounted).
    pub fn loss_eval(&self, inputs: &Tensor, targets: &Tensor) -> Result<f64> {
        let out = self.predict(inputs)?;
        self.loss.value(&out, targets)
    }
}

/// First layer of a contiguous final suffix; `n` for the empty set.
pub fn suffix_start(layers: &BTreeSet<usize>, n: usize) -> Result<usize> {
    let Some(&first) = layers.iter().next() else {
        return Ok(n);
    };
    let expected: BTreeSet<usize> = (first..n).collect();
    if *layers != expected {
        return Err(Error::Contract(format!(
            "truncated backward needs a contiguous final suffix of 0..{n}, got {layers:?}"
        )));
    }
    Ok(first)
}

impl LossKind {
    /// Mean over the batch. Cross-entropy uses `−Σ y log max(p, 1e-12)`;
    /// squared error uses `½‖out − y‖²` per sample.
    pub fn value(self, outputs: &Tensor, targets: &Tensor) -> Result<f64> {
        if outputs.shape() != targets.shape() || outputs.rank() != 2 {
            return Err(Error::Shape(format!(
                "outputs {:?} vs targets {:?}",
                outputs.shape(),
                targets.shape()
            )));
        }
        let batch = outputs.rows() as f64;
        let total: f64 = match self {
            LossKind::CrossEntropy => outputs
                .data()
                .iter()
                .zip(targets.data())
                .filter(|(_, &y)| y != 0.0)
                .map(|(&p, &y)| -y * p.max(PROB_FLOOR).ln())
                .sum(),
            LossKind::MeanSquaredError => {
                0.5 * outputs
                    .data()
                    .iter()
                    .zip(targets.data())
                    .map(|(&o, &y)| (o - y) * (o - y))
                    .sum::<f64>()
            }
        };
        Ok(total / batch)
    }
}
