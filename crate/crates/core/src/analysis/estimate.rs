use serde::{Deserialize, Serialize};

use super::problem::{dot, LogisticRegression, SmoothProblem};
use crate::error::{Error, Result};
use crate::linalg::RngStream;

/// Multiplier applied to sampled estimates of L and M.
pub const SAFETY_FACTOR: f64 = 1.5;

/// Largest eigenvalue of `XᵀX` by power iteration, to relative tolerance
/// `tol` between successive Rayleigh quotients.
pub fn gram_spectral_norm(problem: &LogisticRegression, tol: f64, max_iter: usize) -> Result<f64> {
    let (n, d) = (problem.x.rows(), problem.x.cols());
    if n == 0 || d == 0 {
        return Ok(0.0);
    }
    let mut v: Vec<f64> = (0..d).map(|j| 1.0 + 0.01 * j as f64).collect();
    let mut last = 0.0;
    for _ in 0..max_iter {
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        // w = XᵀX v
        let xv: Vec<f64> = (0..n).map(|r| dot(problem.x.row(r), &v)).collect();
        let mut w = vec![0.0; d];
        for (r, &s) in xv.iter().enumerate() {
            for (wj, xj) in w.iter_mut().zip(problem.x.row(r)) {
                *wj += s * xj;
            }
        }
        let rayleigh = dot(&v, &w);
        if rayleigh == 0.0 {
            return Ok(0.0);
        }
        if (rayleigh - last).abs() <= tol * rayleigh {
            return Ok(rayleigh);
        }
        last = rayleigh;
        v = w;
    }
    Err(Error::Domain(format!("power iteration did not converge in {max_iter} steps")))
}

/// Analytic smoothness bound of regularized logistic regression,
/// `‖X‖²/(4n) + λ`.
pub fn logistic_lipschitz(problem: &LogisticRegression) -> Result<f64> {
    let n = problem.num_samples().max(1) as f64;
    Ok(gram_spectral_norm(problem, 1e-13, 100_000)? / (4.0 * n) + problem.lambda)
}

/// Sampled estimate of the gradient Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Largest observed `‖∇f(φ) − ∇f(θ)‖ / ‖φ − θ‖`.
    pub raw: f64,
    /// `raw` times the safety factor.
    pub value: f64,
    /// Pairs with zero displacement that were skipped.
    pub skipped: usize,
}

/// Max secant ratio over `pairs` random pairs drawn from `points` (with
/// Gaussian perturbations of scale `radius`).
pub fn estimate_lipschitz(
    problem: &impl SmoothProblem,
    points: &[Vec<f64>],
    pairs: usize,
    radius: f64,
    rng: &mut RngStream,
) -> Result<LipschitzEstimate> {
    if points.is_empty() {
        return Err(Error::Domain("need at least one sample point".into()));
    }
    let mut raw: f64 = 0.0;
    let mut skipped = 0;
    for _ in 0..pairs {
        let a = &points[rng.below(points.len())];
        let b = &points[rng.below(points.len())];
        let phi: Vec<f64> = a.iter().map(|v| v + radius * rng.standard_normal()).collect();
        let theta: Vec<f64> = b.iter().map(|v| v + radius * rng.standard_normal()).collect();
        let dx: Vec<f64> = phi.iter().zip(&theta).map(|(p, t)| p - t).collect();
        let dist = dot(&dx, &dx).sqrt();
        if dist == 0.0 {
            skipped += 1;
            continue;
        }
        let (gp, gt) = (problem.grad(&phi), problem.grad(&theta));
        let dg: Vec<f64> = gp.iter().zip(&gt).map(|(p, t)| p - t).collect();
        raw = raw.max(dot(&dg, &dg).sqrt() / dist);
    }
    Ok(LipschitzEstimate {
        raw,
        value: raw * SAFETY_FACTOR,
        skipped,
    })
}

/// `1.5 · max_{i, θ} ‖∇f_i(θ)‖²` over all samples and the given iterates.
pub fn estimate_second_moment(problem: &impl SmoothProblem, iterates: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for theta in iterates {
        for i in 0..problem.num_samples() {
            let g = problem.sample_grad(i, theta);
            best = best.max(dot(&g, &g));
        }
    }
    best * SAFETY_FACTOR
}
