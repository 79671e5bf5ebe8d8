use crate::error::{Error, Result};
use crate::model::{Batch, Network};
use crate::partition::{BlockTiers, Partition};

use super::engine::gradients;
use super::{MultirateConfig, OptState};

/// One semi-implicit Euler step of partitioned underdamped Langevin
/// dynamics:
///
/// `p ← (1 − γh)p − h∇f + √(2γτh)·ξ`, then `θ ← θ + h·p`,
///
/// with friction γ and temperature τ taken per tier. The stored momentum is
/// the velocity `p`. A damping factor `1 − γh < 0` is recorded as a warning
/// in `state.warnings`.
pub fn noise_step(
    net: &mut Network,
    state: &mut OptState,
    partition: Option<&Partition>,
    cfg: &MultirateConfig,
    batch: &Batch,
) -> Result<()> {
    let noise = cfg
        .noise
        .as_ref()
        .ok_or_else(|| Error::config("optimizer.noise", "noise step requires a noise section"))?;
    let tiers = partition.map_or(1, Partition::tier_count);
    cfg.validate(tiers)?;
    state.check_matches(net)?;
    if let Some(p) = partition {
        p.validate(net)?;
    }
    let h = cfg.stepsize;
    for t in 0..tiers {
        let damp = 1.0 - noise.gamma(t) * h;
        if damp < 0.0 {
            state.warn(format!("tier {t}: 1 - gamma*h = {damp} < 0, the velocity update is unstable"));
        }
    }

    let grads = gradients(net, batch, 0)?;
    let all_fast = BlockTiers::Uniform(0);
    for id in net.param_ids() {
        let tiers = partition.and_then(|p| p.block(id)).unwrap_or(&all_fast);
        let g = grads.get(&id).expect("full backward").data();
        let theta = net.param_mut(id).expect("registered").data_mut();
        let p = state.momenta.get_mut(&id).expect("checked").data_mut();
        for i in 0..p.len() {
            let t = tiers.tier(i);
            let (gamma, tau) = (noise.gamma(t), noise.tau(t));
            let w = cfg.decay(t);
            let gi = if w != 0.0 { g[i] + w * theta[i] } else { g[i] };
            let mut v = (1.0 - gamma * h) * p[i] - h * gi;
            if tau > 0.0 {
                v += (2.0 * gamma * tau * h).sqrt() * state.noise_rng.standard_normal();
            }
            p[i] = v;
            theta[i] += h * v;
        }
    }
    net.clear_cache();
    state.micro_steps += 1;
    Ok(())
}
