use serde::{Deserialize, Serialize};

use super::bounds::{sgd_bound, theorem1_bound, BoundInputs};
use super::estimate::{estimate_second_moment, logistic_lipschitz};
use super::problem::{dot, LogisticRegression, SmoothProblem};
use crate::error::{Error, Result};
use crate::linalg::RngStream;

/// Settings of an empirical bound check. The first `slow_coords`
/// coordinates form the slow group, the rest the fast group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCheckConfig {
    pub h: f64,
    pub k: usize,
    pub iterations: usize,
    pub slow_coords: usize,
    pub seeds: Vec<u64>,
    /// Full-batch gradient steps used to approximate the optimum.
    #[serde(default = "default_fstar_steps")]
    pub fstar_steps: usize,
    /// Keep every n-th iterate for the second-moment estimate.
    #[serde(default = "default_stride")]
    pub moment_stride: usize,
}

fn default_fstar_steps() -> usize {
    100_000
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Seed-averaged `(1/T) Σ ‖∇f(θᵗ)‖²`.
    pub lhs: f64,
    /// Multirate bound with the estimated constants.
    pub rhs: f64,
    /// Vanilla SGD bound with the same constants.
    pub sgd_rhs: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "M")]
    pub second_moment: f64,
    pub f0: f64,
    pub fstar: f64,
    pub h: f64,
    pub k: usize,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<f64>,
    pub holds: bool,
}

/// Best loss found by plain gradient descent at stepsize `1/L`.
pub fn approximate_optimum(problem: &impl SmoothProblem, lipschitz: f64, steps: usize) -> f64 {
    let mut theta = vec![0.0; problem.dim()];
    let h = 1.0 / lipschitz;
    let mut best = problem.loss(&theta);
    for _ in 0..steps {
        let g = problem.grad(&theta);
        theta.iter_mut().zip(&g).for_each(|(t, g)| *t -= h * g);
        best = best.min(problem.loss(&theta));
    }
    best
}

/// Momentum-free two-group multirate SGD from θ⁰ = 0: each step draws one
/// sample, the fast group uses its current gradient, the slow group reuses
/// the gradient it saw at the last multiple of `k`. Returns the running mean
/// of the full-batch squared gradient norm and the visited iterates.
pub fn multirate_trajectory(
    problem: &impl SmoothProblem,
    cfg: &BoundCheckConfig,
    seed: u64,
) -> (f64, Vec<Vec<f64>>) {
    let d = problem.dim();
    let mut rng = RngStream::new(seed, 0);
    let mut theta = vec![0.0; d];
    let mut stale = vec![0.0; cfg.slow_coords];
    let mut sum = 0.0;
    let mut kept = vec![theta.clone()];
    for t in 0..cfg.iterations {
        let full = problem.grad(&theta);
        sum += dot(&full, &full);
        let i = rng.below(problem.num_samples());
        let g = problem.sample_grad(i, &theta);
        if t % cfg.k == 0 {
            stale.copy_from_slice(&g[..cfg.slow_coords]);
        }
        for j in 0..d {
            let gj = if j < cfg.slow_coords { stale[j] } else { g[j] };
            theta[j] -= cfg.h * gj;
        }
        if (t + 1) % cfg.moment_stride == 0 {
            kept.push(theta.clone());
        }
    }
    (sum / cfg.iterations as f64, kept)
}

/// Runs the multirate iteration for every seed and compares the averaged
/// gradient norm with the bound evaluated at estimated constants.
pub fn verify_bound(problem: &LogisticRegression, cfg: &BoundCheckConfig) -> Result<BoundReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::Domain("need at least one seed".into()));
    }
    if cfg.slow_coords > problem.dim() || cfg.moment_stride == 0 {
        return Err(Error::Domain(format!(
            "slow group of {} coordinates in dimension {}",
            cfg.slow_coords,
            problem.dim()
        )));
    }
    let lipschitz = logistic_lipschitz(problem)?;
    if 1.0 - cfg.h * lipschitz < 0.0 {
        return Err(Error::Domain(format!(
            "stepsize {} violates 1 - hL >= 0 with L = {lipschitz}",
            cfg.h
        )));
    }
    let groups = if cfg.slow_coords == 0 || cfg.slow_coords == problem.dim() { 1 } else { 2 };
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut iterates = Vec::new();
    for &seed in &cfg.seeds {
        let (avg, kept) = multirate_trajectory(problem, cfg, seed);
        per_seed.push(avg);
        iterates.extend(kept);
    }
    let lhs = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    let second_moment = estimate_second_moment(problem, &iterates);
    let f0 = problem.loss(&vec![0.0; problem.dim()]);
    let fstar = approximate_optimum(problem, lipschitz, cfg.fstar_steps).min(f0);
    let inputs = BoundInputs {
        h: cfg.h,
        iterations: cfg.iterations,
        k: cfg.k,
        lipschitz,
        second_moment,
        groups,
        f0,
        fstar,
    };
    let rhs = theorem1_bound(&inputs)?;
    let sgd_rhs = sgd_bound(&inputs)?;
    Ok(BoundReport {
        lhs,
        rhs,
        sgd_rhs,
        lipschitz,
        second_moment,
        f0,
        fstar,
        h: cfg.h,
        k: cfg.k,
        iterations: cfg.iterations,
        seeds: cfg.seeds.clone(),
        per_seed,
        holds: lhs <= rhs,
    })
}
