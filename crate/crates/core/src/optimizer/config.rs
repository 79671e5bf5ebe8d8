use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-tier friction and temperature for the additive-noise mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Friction γ per tier (one value is broadcast to every tier).
    pub gamma: Vec<f64>,
    /// Temperature τ per tier (one value is broadcast to every tier).
    pub tau: Vec<f64>,
}

impl NoiseConfig {
    pub fn gamma(&self, tier: usize) -> f64 {
        per_tier(&self.gamma, tier)
    }

    pub fn tau(&self, tier: usize) -> f64 {
        per_tier(&self.tau, tier)
    }
}

fn per_tier(values: &[f64], tier: usize) -> f64 {
    match values {
        [] => 0.0,
        [v] => *v,
        vs => vs[tier],
    }
}

fn default_k() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// Hyperparameters of the multirate stepping engine.
///
/// `stepsize` is the slow (base) stepsize `h`; fast micro-steps use
/// `h / k`, or `h / P` with `P` the longest period of a multi-tier schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultirateConfig {
    pub stepsize: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub momentum: f64,
    /// Spread the slow step over the fast micro-steps (linear drift).
    #[serde(default = "yes")]
    pub drift: bool,
    /// Weight decay ω per tier; empty means none, one value is broadcast.
    #[serde(default)]
    pub weight_decay: Vec<f64>,
    /// Uncoupled total stepsize for the slowest tier.
    #[serde(default)]
    pub slow_stepsize: Option<f64>,
    /// Ablation: slow tier uses the fast stepsize while still refreshing
    /// only once per cycle.
    #[serde(default)]
    pub same_lr: bool,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
}

impl MultirateConfig {
    pub fn new(stepsize: f64, k: usize, momentum: f64) -> Self {
        Self {
            stepsize,
            k,
            momentum,
            drift: true,
            weight_decay: Vec::new(),
            slow_stepsize: None,
            same_lr: false,
            noise: None,
        }
    }

    pub fn decay(&self, tier: usize) -> f64 {
        per_tier(&self.weight_decay, tier)
    }

    /// Checks the scalar ranges. `tiers` is the number of tiers the config
    /// will be used with; per-tier lists must have length 0, 1 or `tiers`.
    pub fn validate(&self, tiers: usize) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("optimizer.{field}"), msg));
        if !(self.stepsize.is_finite() && self.stepsize >= 0.0) {
            return bad("stepsize", format!("must be a nonnegative real, got {}", self.stepsize));
        }
        if self.k == 0 {
            return bad("k", "must be a positive integer".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", format!("must lie in [0, 1), got {}", self.momentum));
        }
        if let Some(hs) = self.slow_stepsize {
            if !(hs.is_finite() && hs > 0.0) {
                return bad("slow_stepsize", format!("must be positive, got {hs}"));
            }
            if self.same_lr {
                return bad("same_lr", "cannot be combined with slow_stepsize".into());
            }
        }
        check_list("weight_decay", &self.weight_decay, tiers, |w| w >= 0.0)?;
        if let Some(noise) = &self.noise {
            check_list("noise.gamma", &noise.gamma, tiers, |g| g > 0.0)?;
            if noise.gamma.is_empty() {
                return bad("noise.gamma", "friction is required in noise mode".into());
            }
            check_list("noise.tau", &noise.tau, tiers, |t| t >= 0.0)?;
        }
        Ok(())
    }
}

fn check_list(field: &str, values: &[f64], tiers: usize, ok: impl Fn(f64) -> bool) -> Result<()> {
    let field = format!("optimizer.{field}");
    if values.len() > 1 && values.len() != tiers {
        return Err(Error::config(field, format!("expected 1 or {tiers} values, got {}", values.len())));
    }
    if let Some(v) = values.iter().find(|&&v| !(v.is_finite() && ok(v))) {
        return Err(Error::config(field, format!("value {v} out of range")));
    }
    Ok(())
}
