use crate::error::{Error, Result};
use crate::model::{Batch, Gradients, Network};
use crate::partition::{BlockTiers, Partition, TierSchedule};

use super::{MultirateConfig, OptState};

/// Stepsizes of one tier within a cycle of `P` micro-steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierRate {
    pub period: usize,
    /// Per-micro-step displacement factor in drift mode.
    pub drift: f64,
    /// Full step taken at each refresh in no-drift mode.
    pub jump: f64,
}

/// Stepsizes for every tier of `schedule`.
///
/// The fastest tier uses `h / P`; the slowest uses `h` per cycle (or the
/// override / same-lr variant); intermediate tiers are coupled,
/// `h · period / P`.
pub fn tier_rates(cfg: &MultirateConfig, schedule: &TierSchedule) -> Vec<TierRate> {
    let h = cfg.stepsize;
    let cycle = schedule.cycle_len() as f64;
    let fast = h / cycle;
    let top = schedule.tier_count() - 1;
    let slow_total = if cfg.same_lr { fast } else { cfg.slow_stepsize.unwrap_or(h) };
    schedule
        .periods()
        .iter()
        .enumerate()
        .map(|(i, &period)| {
            let (drift, jump) = if i == 0 {
                (fast, fast)
            } else if i == top {
                (slow_total / cycle, slow_total)
            } else {
                (fast, h * period as f64 / cycle)
            };
            TierRate { period, drift, jump }
        })
        .collect()
}

/// The refresh schedule used for `partition`: its own multi-tier schedule,
/// otherwise two tiers with ratio `cfg.k`.
pub fn schedule_for(partition: &Partition, cfg: &MultirateConfig) -> Result<TierSchedule> {
    let schedule = match partition.schedule() {
        Some(s) => s.clone(),
        None => TierSchedule::two_tier(cfg.k)?,
    };
    if partition.tier_count() > schedule.tier_count() {
        return Err(Error::Contract(format!(
            "partition has {} tiers but the schedule only {}",
            partition.tier_count(),
            schedule.tier_count()
        )));
    }
    Ok(schedule)
}

pub(super) fn gradients(net: &mut Network, batch: &Batch, first: usize) -> Result<Gradients> {
    net.forward(&batch.inputs)?;
    net.backward_from(&batch.targets, first)
}

const ALL_FAST: BlockTiers = BlockTiers::Uniform(0);

fn tiers_of<'a>(partition: Option<&'a Partition>, id: crate::model::ParamId) -> Result<&'a BlockTiers> {
    match partition {
        None => Ok(&ALL_FAST),
        Some(p) => p.block(id).ok_or_else(|| Error::Contract(format!("{id} missing from partition"))),
    }
}

/// `p := μp + g (+ ωθ)` for every scalar whose tier is `due`.
pub(super) fn refresh(
    net: &Network,
    state: &mut OptState,
    partition: Option<&Partition>,
    grads: &Gradients,
    momentum: f64,
    decay: impl Fn(usize) -> f64,
    due: impl Fn(usize) -> bool,
) -> Result<()> {
    for id in net.param_ids() {
        let tiers = tiers_of(partition, id)?;
        let wanted = match tiers {
            BlockTiers::Uniform(t) => due(*t),
            BlockTiers::PerScalar(v) => v.iter().any(|&t| due(t as usize)),
        };
        if !wanted {
            continue;
        }
        let g = grads
            .get(&id)
            .ok_or_else(|| Error::Contract(format!("no gradient computed for {id}")))?;
        let theta = net.param(id).expect("registered");
        let p = state.momenta.get_mut(&id).expect("checked");
        let (p, g, theta) = (p.data_mut(), g.data(), theta.data());
        for i in 0..p.len() {
            let t = tiers.tier(i);
            if !due(t) {
                continue;
            }
            let w = decay(t);
            let gi = if w != 0.0 { g[i] + w * theta[i] } else { g[i] };
            p[i] = momentum * p[i] + gi;
        }
    }
    Ok(())
}

/// `θ := θ − rate(tier)·p`; tiers with a zero rate are left untouched.
pub(super) fn advance(
    net: &mut Network,
    state: &OptState,
    partition: Option<&Partition>,
    rate: impl Fn(usize) -> f64,
) -> Result<()> {
    for id in net.param_ids() {
        let tiers = tiers_of(partition, id)?;
        let p = state.momenta.get(&id).expect("checked").data();
        let theta = net.param_mut(id).expect("registered").data_mut();
        for i in 0..theta.len() {
            let r = rate(tiers.tier(i));
            if r != 0.0 {
                theta[i] -= r * p[i];
            }
        }
    }
    net.clear_cache();
    Ok(())
}

/// Plain SGD with momentum at stepsize `lr` on all parameters.
pub(super) fn sgd_step(net: &mut Network, state: &mut OptState, batch: &Batch, lr: f64, cfg: &MultirateConfig) -> Result<()> {
    let grads = gradients(net, batch, 0)?;
    refresh(net, state, None, &grads, cfg.momentum, |_| cfg.decay(0), |_| true)?;
    advance(net, state, None, |_| lr)?;
    state.micro_steps += 1;
    Ok(())
}

/// Reference SGD with momentum: `p := μp + ∇L`, `θ := θ − h·p` on every
/// parameter, using tier-0 weight decay.
pub fn vanilla_step(net: &mut Network, state: &mut OptState, batch: &Batch, cfg: &MultirateConfig) -> Result<()> {
    cfg.validate(1)?;
    state.check_matches(net)?;
    sgd_step(net, state, batch, cfg.stepsize, cfg)
}

/// One macro step: a full cycle of the partition's tier schedule, one
/// minibatch per micro-step.
///
/// With `cfg.drift` every tier moves every micro-step along its current
/// momentum, and the due tiers share one gradient evaluation whose backward
/// pass stops at the first layer they touch. Without drift each due slow
/// tier gets its own gradient and takes its full step before the faster
/// tiers are evaluated. Weight decay from `cfg` is applied at each refresh.
pub fn macro_step(
    net: &mut Network,
    state: &mut OptState,
    partition: &Partition,
    cfg: &MultirateConfig,
    batches: &[Batch],
) -> Result<()> {
    let schedule = schedule_for(partition, cfg)?;
    cfg.validate(schedule.tier_count())?;
    partition.validate(net)?;
    state.check_matches(net)?;
    if batches.len() != schedule.cycle_len() {
        return Err(Error::Contract(format!(
            "macro step needs {} minibatches, got {}",
            schedule.cycle_len(),
            batches.len()
        )));
    }
    let rates = tier_rates(cfg, &schedule);
    let n_tiers = schedule.tier_count();
    let first_layer: Vec<Option<usize>> = (0..n_tiers)
        .map(|t| partition.layers_with_tier(t).into_iter().next())
        .collect();
    let decay = |t: usize| cfg.decay(t);

    for (t, batch) in batches.iter().enumerate() {
        if cfg.drift {
            let due = |i: usize| schedule.is_due(i, t);
            let first = (0..n_tiers).filter(|&i| due(i)).filter_map(|i| first_layer[i]).min();
            if let Some(first) = first {
                let grads = gradients(net, batch, first)?;
                refresh(net, state, Some(partition), &grads, cfg.momentum, decay, due)?;
            }
            advance(net, state, Some(partition), |i| rates[i].drift)?;
        } else {
            for i in (0..n_tiers).rev() {
                let Some(first) = first_layer[i] else { continue };
                if !schedule.is_due(i, t) {
                    continue;
                }
                let grads = gradients(net, batch, first)?;
                refresh(net, state, Some(partition), &grads, cfg.momentum, decay, |j| j == i)?;
                let jump = rates[i].jump;
                advance(net, state, Some(partition), |j| if j == i { jump } else { 0.0 })?;
            }
        }
    }
    state.micro_steps += batches.len() as u64;
    state.macro_steps += 1;
    Ok(())
}

/// Macro step with weight decay. Decay enters each momentum refresh as
/// `g + ωθ` with the current parameter values, so slow parameters are
/// decayed only when they are refreshed. With all ω = 0 this is exactly
/// `macro_step`.
pub fn macro_step_wd(
    net: &mut Network,
    state: &mut OptState,
    partition: &Partition,
    cfg: &MultirateConfig,
    batches: &[Batch],
) -> Result<()> {
    if let Some(w) = cfg.weight_decay.iter().find(|&&w| w < 0.0) {
        return Err(Error::Domain(format!("weight decay must be nonnegative, got {w}")));
    }
    macro_step(net, state, partition, cfg, batches)
}
