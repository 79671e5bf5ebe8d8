use crate::error::{Error, Result};
use crate::model::{Batch, Network};

use super::engine::sgd_step;
use super::{MultirateConfig, OptState};

/// Merge period `h_S / h_F`, which must be a positive integer.
pub fn merge_period(h_fast: f64, h_slow: f64) -> Result<usize> {
    if !(h_fast > 0.0 && h_slow > 0.0) {
        return Err(Error::Domain(format!("stepsizes must be positive, got {h_fast} and {h_slow}")));
    }
    let ratio = h_slow / h_fast;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * k {
        return Err(Error::Domain(format!("h_S / h_F = {ratio} is not a positive integer")));
    }
    Ok(k as usize)
}

/// Replaces both networks' parameters by their parameter-wise mean.
pub fn average_into(a: &mut Network, b: &mut Network) -> Result<()> {
    if !a.same_architecture(b) {
        return Err(Error::Contract("cannot average networks of different architectures".into()));
    }
    let mean: Vec<f64> = a
        .flat_params()
        .iter()
        .zip(b.flat_params())
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    a.set_flat_params(&mean)?;
    b.set_flat_params(&mean)
}

/// Two copies trained on different timescales and merged.
///
/// `net_a` takes `k` steps at `h_F = h / k` on the `k` batches, `net_b` takes
/// one step at `h_S` (`h`, or the slow override) on the first batch, and both
/// are then set to the parameter-wise mean. Momenta are kept per copy.
pub fn composite_average_step(
    net_a: &mut Network,
    net_b: &mut Network,
    state_a: &mut OptState,
    state_b: &mut OptState,
    cfg: &MultirateConfig,
    batches: &[Batch],
) -> Result<()> {
    cfg.validate(2)?;
    if !net_a.same_architecture(net_b) {
        return Err(Error::Contract("composite averaging needs two networks of the same architecture".into()));
    }
    state_a.check_matches(net_a)?;
    state_b.check_matches(net_b)?;
    if batches.len() != cfg.k {
        return Err(Error::Contract(format!(
            "composite step needs {} minibatches, got {}",
            cfg.k,
            batches.len()
        )));
    }
    let h_fast = cfg.stepsize / cfg.k as f64;
    let h_slow = cfg.slow_stepsize.unwrap_or(cfg.stepsize);
    for batch in batches {
        sgd_step(net_a, state_a, batch, h_fast, cfg)?;
    }
    sgd_step(net_b, state_b, &batches[0], h_slow, cfg)?;
    state_a.macro_steps += 1;
    state_b.macro_steps += 1;
    average_into(net_a, net_b)
}
