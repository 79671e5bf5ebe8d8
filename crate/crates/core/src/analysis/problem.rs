use crate::error::{Error, Result};
use crate::linalg::{RngStream, Tensor};

/// A finite-sum objective `f(θ) = (1/n) Σ f_i(θ)` with exact gradients.
pub trait SmoothProblem {
    fn dim(&self) -> usize;
    fn num_samples(&self) -> usize;
    fn loss(&self, theta: &[f64]) -> f64;
    fn grad(&self, theta: &[f64]) -> Vec<f64>;
    /// Gradient of the single-sample term `f_i`.
    fn sample_grad(&self, i: usize, theta: &[f64]) -> Vec<f64>;
}

/// `f(θ) = ½ θᵀAθ`, a single-sample problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub a: Tensor,
}

impl Quadratic {
    pub fn new(a: Tensor) -> Result<Self> {
        if a.rank() != 2 || a.rows() != a.cols() {
            return Err(Error::Shape(format!("quadratic form needs a square matrix, got {:?}", a.shape())));
        }
        Ok(Self { a })
    }

    fn apply(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.a.rows())
            .map(|r| self.a.row(r).iter().zip(theta).map(|(a, t)| a * t).sum())
            .collect()
    }
}

impl SmoothProblem for Quadratic {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn num_samples(&self) -> usize {
        1
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        0.5 * dot(theta, &self.apply(theta))
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        self.apply(theta)
    }

    fn sample_grad(&self, _: usize, theta: &[f64]) -> Vec<f64> {
        self.apply(theta)
    }
}

/// L2-regularized logistic regression with labels `s_i ∈ {−1, +1}`:
/// `f(θ) = (1/n) Σ log(1 + exp(−s_i x_iᵀθ)) + (λ/2)‖θ‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    /// `n × d` design matrix.
    pub x: Tensor,
    pub labels: Vec<f64>,
    pub lambda: f64,
}

impl LogisticRegression {
    pub fn new(x: Tensor, labels: Vec<f64>, lambda: f64) -> Result<Self> {
        if x.rank() != 2 || x.rows() != labels.len() {
            return Err(Error::Shape(format!("{:?} design for {} labels", x.shape(), labels.len())));
        }
        if labels.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::Domain("labels must be +1 or -1".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(Self { x, labels, lambda })
    }

    /// Standardized Gaussian features labelled by a planted direction, with
    /// a fraction of flipped labels.
    pub fn synthetic(n: usize, d: usize, lambda: f64, flip: f64, rng: &mut RngStream) -> Result<Self> {
        let planted: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let mut data: Vec<f64> = (0..n * d).map(|_| rng.standard_normal()).collect();
        for c in 0..d {
            let mean = (0..n).map(|r| data[r * d + c]).sum::<f64>() / n as f64;
            let var = (0..n).map(|r| (data[r * d + c] - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt().max(1e-12);
            for r in 0..n {
                data[r * d + c] = (data[r * d + c] - mean) / sd;
            }
        }
        let labels = (0..n)
            .map(|r| {
                let s = if dot(&data[r * d..(r + 1) * d], &planted) >= 0.0 { 1.0 } else { -1.0 };
                if rng.bernoulli(flip) {
                    -s
                } else {
                    s
                }
            })
            .collect();
        Self::new(Tensor::new(vec![n, d], data)?, labels, lambda)
    }

    fn margin(&self, i: usize, theta: &[f64]) -> f64 {
        self.labels[i] * dot(self.x.row(i), theta)
    }
}

/// `log(1 + e^{−m})` without overflow.
fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SmoothProblem for LogisticRegression {
    fn dim(&self) -> usize {
        self.x.cols()
    }

    fn num_samples(&self) -> usize {
        self.x.rows()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let n = self.num_samples();
        let data = (0..n).map(|i| softplus_neg(self.margin(i, theta))).sum::<f64>() / n as f64;
        data + 0.5 * self.lambda * dot(theta, theta)
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.num_samples();
        let mut g: Vec<f64> = theta.iter().map(|t| self.lambda * t).collect();
        for i in 0..n {
            let c = -self.labels[i] * sigmoid(-self.margin(i, theta)) / n as f64;
            for (gj, xj) in g.iter_mut().zip(self.x.row(i)) {
                *gj += c * xj;
            }
        }
        g
    }

    fn sample_grad(&self, i: usize, theta: &[f64]) -> Vec<f64> {
        let c = -self.labels[i] * sigmoid(-self.margin(i, theta));
        self.x
            .row(i)
            .iter()
            .zip(theta)
            .map(|(xj, t)| c * xj + self.lambda * t)
            .collect()
    }
}
