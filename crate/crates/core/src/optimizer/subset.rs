use crate::error::{Error, Result};
use crate::model::{Batch, Network};
use crate::partition::Partition;

use super::engine::{advance, gradients, refresh};
use super::{MultirateConfig, OptState};

fn require_mask(partition: &Partition) -> Result<()> {
    if partition.is_masked() {
        Ok(())
    } else {
        Err(Error::Contract("random-subset steps need a mask partition".into()))
    }
}

/// One random-subset cycle on `k + 1` minibatches.
///
/// The slow scalars are stashed and zeroed, the fast scalars take `k` steps
/// at stepsize `h` (slow momenta stay frozen), the slow values are restored,
/// and a joint step on the last batch moves fast scalars by `h` and slow
/// scalars by `h·k` (or the slow override). Returns the freshly sampled mask
/// for the next cycle.
pub fn random_subset_cycle(
    net: &mut Network,
    state: &mut OptState,
    partition: &Partition,
    cfg: &MultirateConfig,
    batches: &[Batch],
) -> Result<Partition> {
    require_mask(partition)?;
    cfg.validate(2)?;
    partition.validate(net)?;
    state.check_matches(net)?;
    let k = cfg.k;
    if batches.len() != k + 1 {
        return Err(Error::Contract(format!(
            "random-subset cycle needs {} minibatches, got {}",
            k + 1,
            batches.len()
        )));
    }
    let h = cfg.stepsize;
    let slow = if cfg.same_lr { h } else { cfg.slow_stepsize.unwrap_or(h * k as f64) };
    let decay = |t: usize| cfg.decay(t);

    state.stash_slow(net, partition)?;
    let fast_phase = (|| -> Result<()> {
        for batch in &batches[..k] {
            let grads = gradients(net, batch, 0)?;
            refresh(net, state, Some(partition), &grads, cfg.momentum, decay, |t| t == 0)?;
            advance(net, state, Some(partition), |t| if t == 0 { h } else { 0.0 })?;
        }
        Ok(())
    })();
    // restore even when the fast phase failed
    state.restore_slow(net, partition)?;
    fast_phase?;

    let grads = gradients(net, &batches[k], 0)?;
    refresh(net, state, Some(partition), &grads, cfg.momentum, decay, |_| true)?;
    advance(net, state, Some(partition), |t| if t == 0 { h } else { slow })?;

    state.micro_steps += k as u64 + 1;
    state.macro_steps += 1;
    partition.resample(net, &mut state.mask_rng)
}

/// Ablation without the multirate component: draw a fresh mask, zero the
/// masked scalars for one step at stepsize `h`, update only the unmasked
/// ones, then restore the masked values.
pub fn remask_step(
    net: &mut Network,
    state: &mut OptState,
    template: &Partition,
    cfg: &MultirateConfig,
    batch: &Batch,
) -> Result<()> {
    require_mask(template)?;
    cfg.validate(2)?;
    state.check_matches(net)?;
    let mask = template.resample(net, &mut state.mask_rng)?;
    state.stash_slow(net, &mask)?;
    let step = (|| {
        let grads = gradients(net, batch, 0)?;
        refresh(net, state, Some(&mask), &grads, cfg.momentum, |t| cfg.decay(t), |t| t == 0)?;
        advance(net, state, Some(&mask), |t| if t == 0 { cfg.stepsize } else { 0.0 })
    })();
    state.restore_slow(net, &mask)?;
    step?;
    state.micro_steps += 1;
    Ok(())
}
