use serde::{Deserialize, Serialize};

use crate::cost::CostCounters;
use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_nt, matmul_tn, RngStream, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    /// Only valid on the output layer, fused with cross-entropy.
    Softmax,
}

impl Activation {
    pub(crate) fn apply(self, z: &mut Tensor) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => z.data_mut().iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Softmax => softmax_rows(z),
        }
    }

    /// Multiplies `grad` (w.r.t. the activation output) by the derivative,
    /// expressed through the cached output `out`.
    pub(crate) fn backprop(self, grad: &mut Tensor, out: &Tensor) -> Result<()> {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for (g, &o) in grad.data_mut().iter_mut().zip(out.data()) {
                    if o <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Tanh => {
                for (g, &o) in grad.data_mut().iter_mut().zip(out.data()) {
                    *g *= 1.0 - o * o;
                }
            }
            Activation::Softmax => {
                return Err(Error::Contract(
                    "softmax is only differentiated fused with cross-entropy".into(),
                ))
            }
        }
        Ok(())
    }
}

fn softmax_rows(z: &mut Tensor) {
    let c = z.cols();
    for row in z.data_mut().chunks_mut(c) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Fully connected layer, `z = x·Wᵀ + b` with `W: out×in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

/// Single-stride "valid" convolution on channel-major flattened images,
/// lowered to a matrix product via im2col.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    /// `out_channels × (in_channels·kernel²)`
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Conv2d {
    fn out_hw(&self) -> (usize, usize) {
        (self.height + 1 - self.kernel, self.width + 1 - self.kernel)
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// `[batch·P, C·k·k]` where P is the number of output positions.
    fn im2col(&self, x: &Tensor) -> Tensor {
        let (ho, wo) = self.out_hw();
        let (h, w, k) = (self.height, self.width, self.kernel);
        let kk = self.patch_len();
        let batch = x.rows();
        let mut cols = vec![0.0; batch * ho * wo * kk];
        for s in 0..batch {
            let img = x.row(s);
            for oy in 0..ho {
                for ox in 0..wo {
                    let base = ((s * ho + oy) * wo + ox) * kk;
                    let mut idx = base;
                    for c in 0..self.in_channels {
                        for ky in 0..k {
                            let src = c * h * w + (oy + ky) * w + ox;
                            cols[idx..idx + k].copy_from_slice(&img[src..src + k]);
                            idx += k;
                        }
                    }
                }
            }
        }
        Tensor::new(vec![batch * ho * wo, kk], cols).expect("im2col shape")
    }

    fn col2im(&self, dcols: &Tensor, batch: usize) -> Tensor {
        let (ho, wo) = self.out_hw();
        let (h, w, k) = (self.height, self.width, self.kernel);
        let kk = self.patch_len();
        let feat = self.in_channels * h * w;
        let mut dx = vec![0.0; batch * feat];
        let d = dcols.data();
        for s in 0..batch {
            let img = &mut dx[s * feat..(s + 1) * feat];
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut idx = ((s * ho + oy) * wo + ox) * kk;
                    for c in 0..self.in_channels {
                        for ky in 0..k {
                            let dst = c * h * w + (oy + ky) * w + ox;
                            for kx in 0..k {
                                img[dst + kx] += d[idx + kx];
                            }
                            idx += k;
                        }
                    }
                }
            }
        }
        Tensor::new(vec![batch, feat], dx).expect("col2im shape")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    Dense(Dense),
    Conv(Conv2d),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub kind: LayerKind,
    pub activation: Activation,
}

/// Per-layer gradients produced by one backward visit.
pub(crate) struct LayerGrads {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub input: Option<Tensor>,
}

impl Layer {
    pub fn dense(inputs: usize, outputs: usize, bias: bool, activation: Activation, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = uniform(&[outputs, inputs], bound, rng);
        let bias = bias.then(|| uniform(&[outputs], bound, rng));
        Layer {
            kind: LayerKind::Dense(Dense { weight, bias }),
            activation,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn conv(
        in_channels: usize,
        out_channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        bias: bool,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if kernel == 0 || kernel > height || kernel > width {
            return Err(Error::Shape(format!(
                "kernel {kernel} does not fit a {height}x{width} image"
            )));
        }
        let fan_in = in_channels * kernel * kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight = uniform(&[out_channels, fan_in], bound, rng);
        let bias = bias.then(|| uniform(&[out_channels], bound, rng));
        Ok(Layer {
            kind: LayerKind::Conv(Conv2d {
                in_channels,
                out_channels,
                height,
                width,
                kernel,
                weight,
                bias,
            }),
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        match &self.kind {
            LayerKind::Dense(d) => d.weight.cols(),
            LayerKind::Conv(c) => c.in_channels * c.height * c.width,
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            LayerKind::Dense(d) => d.weight.rows(),
            LayerKind::Conv(c) => {
                let (ho, wo) = c.out_hw();
                c.out_channels * ho * wo
            }
        }
    }

    pub fn weight(&self) -> &Tensor {
        match &self.kind {
            LayerKind::Dense(d) => &d.weight,
            LayerKind::Conv(c) => &c.weight,
        }
    }

    pub fn weight_mut(&mut self) -> &mut Tensor {
        match &mut self.kind {
            LayerKind::Dense(d) => &mut d.weight,
            LayerKind::Conv(c) => &mut c.weight,
        }
    }

    pub fn bias(&self) -> Option<&Tensor> {
        match &self.kind {
            LayerKind::Dense(d) => d.bias.as_ref(),
            LayerKind::Conv(c) => c.bias.as_ref(),
        }
    }

    pub fn bias_mut(&mut self) -> Option<&mut Tensor> {
        match &mut self.kind {
            LayerKind::Dense(d) => d.bias.as_mut(),
            LayerKind::Conv(c) => c.bias.as_mut(),
        }
    }

    /// Pre-activation output. The second value is the im2col buffer for
    /// convolutions, kept for the backward pass.
    pub(crate) fn affine(&self, x: &Tensor, counters: Option<&mut CostCounters>) -> Result<(Tensor, Option<Tensor>)> {
        if x.rank() != 2 || x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "layer expects {} input features, got shape {:?}",
                self.input_dim(),
                x.shape()
            )));
        }
        match &self.kind {
            LayerKind::Dense(d) => {
                let mut z = matmul_nt(x, &d.weight, counters)?;
                if let Some(b) = &d.bias {
                    add_row_bias(&mut z, b);
                }
                Ok((z, None))
            }
            LayerKind::Conv(c) => {
                let cols = c.im2col(x);
                let mut zc = matmul_nt(&cols, &c.weight, counters)?;
                if let Some(b) = &c.bias {
                    add_row_bias(&mut zc, b);
                }
                let z = positions_to_channel_major(&zc, x.rows(), c.out_channels);
                Ok((z, Some(cols)))
            }
        }
    }

    /// Gradients for this layer from `delta` (loss gradient w.r.t. the
    /// pre-activation output). The input gradient is only formed on request.
    pub(crate) fn backward(
        &self,
        delta: &Tensor,
        input: &Tensor,
        cols: Option<&Tensor>,
        want_input: bool,
        counters: &mut CostCounters,
    ) -> Result<LayerGrads> {
        match &self.kind {
            LayerKind::Dense(d) => {
                let weight = matmul_tn(delta, input, Some(counters))?;
                let bias = d.bias.as_ref().map(|_| delta.sum_rows());
                let input = if want_input {
                    Some(matmul(delta, &d.weight, Some(counters))?)
                } else {
                    None
                };
                Ok(LayerGrads { weight, bias, input })
            }
            LayerKind::Conv(c) => {
                let cols = cols.ok_or_else(|| Error::State("missing im2col cache".into()))?;
                let batch = delta.rows();
                let dz = channel_major_to_positions(delta, batch, c.out_channels);
                let weight = matmul_tn(&dz, cols, Some(counters))?;
                let bias = c.bias.as_ref().map(|_| dz.sum_rows());
                let input = if want_input {
                    let dcols = matmul(&dz, &c.weight, Some(counters))?;
                    Some(c.col2im(&dcols, batch))
                } else {
                    None
                };
                Ok(LayerGrads { weight, bias, input })
            }
        }
    }
}

fn uniform(shape: &[usize], bound: f64, rng: &mut RngStream) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.uniform_range(-bound, bound);
    }
    t
}

fn add_row_bias(z: &mut Tensor, b: &Tensor) {
    let c = z.cols();
    for row in z.data_mut().chunks_mut(c) {
        for (v, &bv) in row.iter_mut().zip(b.data()) {
            *v += bv;
        }
    }
}

/// `[batch·P, C]` → `[batch, C·P]`
fn positions_to_channel_major(zc: &Tensor, batch: usize, channels: usize) -> Tensor {
    let p = zc.rows() / batch;
    let mut out = vec![0.0; batch * channels * p];
    let d = zc.data();
    for s in 0..batch {
        for pos in 0..p {
            for ch in 0..channels {
                out[s * channels * p + ch * p + pos] = d[(s * p + pos) * channels + ch];
            }
        }
    }
    Tensor::new(vec![batch, channels * p], out).expect("conv output shape")
}

/// `[batch, C·P]` → `[batch·P, C]`
fn channel_major_to_positions(z: &Tensor, batch: usize, channels: usize) -> Tensor {
    let p = z.cols() / channels;
    let mut out = vec![0.0; batch * p * channels];
    let d = z.data();
    for s in 0..batch {
        for ch in 0..channels {
            for pos in 0..p {
                out[(s * p + pos) * channels + ch] = d[s * channels * p + ch * p + pos];
            }
        }
    }
    Tensor::new(vec![batch * p, channels], out).expect("conv delta shape")
}
