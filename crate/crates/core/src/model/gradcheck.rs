use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::Result;
use crate::linalg::Tensor;

/// Pass threshold for `GradCheckReport::max_rel_error`.
pub const GRADCHECK_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub coordinates: usize,
    /// Largest `|a − n| / (1 + |a|)` over all coordinates.
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub eps: f64,
    pub passed: bool,
}

/// Compares backpropagated gradients with central differences of the loss,
/// one parameter at a time. The probes run on a copy, so `net`'s counters
/// only see the single forward/backward pair.
pub fn gradient_check(net: &mut Network, inputs: &Tensor, targets: &Tensor, eps: f64) -> Result<GradCheckReport> {
    net.forward(inputs)?;
    let grads = net.backward_full(targets)?;
    let analytic: Vec<f64> = net
        .param_ids()
        .iter()
        .flat_map(|id| grads[id].data().to_vec())
        .collect();
    let base = net.flat_params();
    let mut probe = net.clone();
    let mut p = base.clone();
    let (mut worst, mut worst_i) = (0.0f64, 0);
    for i in 0..base.len() {
        p[i] = base[i] + eps;
        probe.set_flat_params(&p)?;
        let up = probe.loss_eval(inputs, targets)?;
        p[i] = base[i] - eps;
        probe.set_flat_params(&p)?;
        let down = probe.loss_eval(inputs, targets)?;
        p[i] = base[i];
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / (1.0 + analytic[i].abs());
        if err > worst || err.is_nan() {
            worst = err;
            worst_i = i;
        }
    }
    Ok(GradCheckReport {
        coordinates: base.len(),
        max_rel_error: worst,
        worst_coordinate: worst_i,
        eps,
        passed: worst <= GRADCHECK_TOL,
    })
}
