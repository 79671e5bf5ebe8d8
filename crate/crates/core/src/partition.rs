//! Assignment of parameters to rate tiers.
//!
//! Tier 0 is the fastest and is updated every micro-step; tier `i` is
//! refreshed every `period(i)` micro-steps. Assignments are stored per
//! parameter block, either uniformly or per scalar (random-subset masks).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RngStream;
use crate::model::{Network, ParamId, Role};

/// One rate level: refreshed every `period` micro-steps with `stepsize`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTier {
    pub index: usize,
    pub period: usize,
    pub stepsize: f64,
}

/// Nested refresh periods built from the ratios `K_0, K_1, …`:
/// `period(0) = 1`, `period(i) = period(i-1)·K_{i-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierSchedule {
    ratios: Vec<usize>,
    periods: Vec<usize>,
}

impl TierSchedule {
    pub fn from_ratios(ratios: &[usize]) -> Result<Self> {
        if let Some(bad) = ratios.iter().find(|&&k| k == 0) {
            return Err(Error::Domain(format!("rate ratios must be positive, got {bad}")));
        }
        let mut periods = vec![1usize];
        for &k in ratios {
            let next = periods.last().unwrap().checked_mul(k).ok_or_else(|| Error::Domain("period overflow".into()))?;
            periods.push(next);
        }
        Ok(Self {
            ratios: ratios.to_vec(),
            periods,
        })
    }

    pub fn two_tier(k: usize) -> Result<Self> {
        Self::from_ratios(&[k])
    }

    pub fn ratios(&self) -> &[usize] {
        &self.ratios
    }

    pub fn periods(&self) -> &[usize] {
        &self.periods
    }

    pub fn tier_count(&self) -> usize {
        self.periods.len()
    }

    pub fn period(&self, tier: usize) -> usize {
        self.periods[tier]
    }

    /// Micro-steps in one cycle of the slowest tier.
    pub fn cycle_len(&self) -> usize {
        *self.periods.last().unwrap()
    }

    /// Whether `tier` refreshes its gradient at micro-step `t`.
    pub fn is_due(&self, tier: usize, t: usize) -> bool {
        t % self.periods[tier] == 0
    }

    /// Coupled stepsizes: tier `i` steps with `fast_stepsize · period(i)`.
    pub fn rate_tiers(&self, fast_stepsize: f64) -> Vec<RateTier> {
        self.periods
            .iter()
            .enumerate()
            .map(|(index, &period)| RateTier {
                index,
                period,
                stepsize: fast_stepsize * period as f64,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockTiers {
    Uniform(usize),
    PerScalar(Vec<u8>),
}

impl BlockTiers {
    pub fn tier(&self, index: usize) -> usize {
        match self {
            BlockTiers::Uniform(t) => *t,
            BlockTiers::PerScalar(v) => v[index] as usize,
        }
    }

    pub fn contains(&self, tier: usize) -> bool {
        match self {
            BlockTiers::Uniform(t) => *t == tier,
            BlockTiers::PerScalar(v) => v.iter().any(|&x| x as usize == tier),
        }
    }
}

/// Which subset of biases goes on the slow tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BiasVariant {
    #[default]
    All,
    /// Only the first layer's bias.
    InputOnly,
    /// Only the last layer's bias.
    OutputOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionMode {
    AllFast,
    Layerwise { fast_layers: usize },
    BiasSlow { variant: BiasVariant },
    RandomSubset { probabilities: Vec<f64>, include_biases: bool },
    MultiTier { groups: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    #[serde(with = "crate::serde_util")]
    blocks: BTreeMap<ParamId, BlockTiers>,
    tier_count: usize,
    mode: PartitionMode,
    resample_period: Option<usize>,
    schedule: Option<TierSchedule>,
}

impl Partition {
    fn from_fn(net: &Network, tier_count: usize, mode: PartitionMode, mut f: impl FnMut(ParamId, usize) -> BlockTiers) -> Self {
        let blocks = net
            .param_ids()
            .into_iter()
            .map(|id| {
                let len = net.param(id).expect("registered").len();
                (id, f(id, len))
            })
            .collect();
        Self {
            blocks,
            tier_count,
            mode,
            resample_period: None,
            schedule: None,
        }
    }

    /// Single tier: every parameter is fast.
    pub fn all_fast(net: &Network) -> Self {
        Self::from_fn(net, 1, PartitionMode::AllFast, |_, _| BlockTiers::Uniform(0))
    }

    /// Last `fast_layers` layers fast (tier 0), the rest slow (tier 1).
    pub fn layerwise(net: &Network, fast_layers: usize) -> Result<Self> {
        let n = net.num_layers();
        if fast_layers == 0 || fast_layers > n {
            return Err(Error::Domain(format!(
                "fast layer count must lie in 1..={n}, got {fast_layers}"
            )));
        }
        let first_fast = n - fast_layers;
        Ok(Self::from_fn(net, 2, PartitionMode::Layerwise { fast_layers }, |id, _| {
            BlockTiers::Uniform(usize::from(id.layer < first_fast))
        }))
    }

    /// Weights fast, (selected) biases slow. A network without biases yields
    /// an empty slow set.
    pub fn bias_slow(net: &Network, variant: BiasVariant) -> Self {
        let last = net.num_layers() - 1;
        Self::from_fn(net, 2, PartitionMode::BiasSlow { variant }, |id, _| {
            let slow = id.role == Role::Bias
                && match variant {
                    BiasVariant::All => true,
                    BiasVariant::InputOnly => id.layer == 0,
                    BiasVariant::OutputOnly => id.layer == last,
                };
            BlockTiers::Uniform(usize::from(slow))
        })
    }

    /// Each weight scalar of layer `l` goes slow independently with
    /// probability `probabilities[l]`; biases stay fast unless
    /// `include_biases`. The mask is meant to be resampled every
    /// `resample_period` steps.
    pub fn sample_random_subset(
        net: &Network,
        probabilities: &[f64],
        include_biases: bool,
        resample_period: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if probabilities.len() != net.num_layers() {
            return Err(Error::Domain(format!(
                "need one probability per layer ({}), got {}",
                net.num_layers(),
                probabilities.len()
            )));
        }
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        if resample_period == 0 {
            return Err(Error::Domain("resample period must be positive".into()));
        }
        let mode = PartitionMode::RandomSubset {
            probabilities: probabilities.to_vec(),
            include_biases,
        };
        let mut part = Self::from_fn(net, 2, mode, |id, len| {
            if id.role == Role::Bias && !include_biases {
                return BlockTiers::Uniform(0);
            }
            let p = probabilities[id.layer];
            BlockTiers::PerScalar((0..len).map(|_| u8::from(rng.bernoulli(p))).collect())
        });
        part.resample_period = Some(resample_period);
        Ok(part)
    }

    /// Draws the next mask with the same probabilities.
    pub fn resample(&self, net: &Network, rng: &mut RngStream) -> Result<Self> {
        match &self.mode {
            PartitionMode::RandomSubset {
                probabilities,
                include_biases,
            } => Self::sample_random_subset(net, probabilities, *include_biases, self.resample_period.unwrap_or(1), rng),
            _ => Err(Error::Contract("only random-subset partitions can be resampled".into())),
        }
    }

    /// `groups[i]` lists the layers of tier `i` (0 = fastest); `ratios` are
    /// the `K_j` between consecutive tiers.
    pub fn multi_tier(net: &Network, groups: &[Vec<usize>], ratios: &[usize]) -> Result<Self> {
        if groups.is_empty() || ratios.len() + 1 != groups.len() {
            return Err(Error::Domain(format!(
                "{} tiers need {} ratios, got {}",
                groups.len(),
                groups.len().saturating_sub(1),
                ratios.len()
            )));
        }
        let n = net.num_layers();
        let mut owner = vec![None; n];
        for (tier, group) in groups.iter().enumerate() {
            for &layer in group {
                if layer >= n {
                    return Err(Error::Domain(format!("layer {layer} out of range 0..{n}")));
                }
                if let Some(prev) = owner[layer].replace(tier) {
                    return Err(Error::Domain(format!("layer {layer} assigned to tiers {prev} and {tier}")));
                }
            }
        }
        if let Some(missing) = owner.iter().position(Option::is_none) {
            return Err(Error::Domain(format!("layer {missing} is not assigned to any tier")));
        }
        let schedule = TierSchedule::from_ratios(ratios)?;
        let mode = PartitionMode::MultiTier {
            groups: groups.to_vec(),
        };
        let mut part = Self::from_fn(net, groups.len(), mode, |id, _| BlockTiers::Uniform(owner[id.layer].unwrap()));
        part.schedule = Some(schedule);
        Ok(part)
    }

    pub fn tier_count(&self) -> usize {
        self.tier_count
    }

    pub fn mode(&self) -> &PartitionMode {
        &self.mode
    }

    pub fn resample_period(&self) -> Option<usize> {
        self.resample_period
    }

    pub fn schedule(&self) -> Option<&TierSchedule> {
        self.schedule.as_ref()
    }

    pub fn is_masked(&self) -> bool {
        matches!(self.mode, PartitionMode::RandomSubset { .. })
    }

    pub fn block(&self, id: ParamId) -> Option<&BlockTiers> {
        self.blocks.get(&id)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&ParamId, &BlockTiers)> {
        self.blocks.iter()
    }

    pub fn tier_of(&self, id: ParamId, index: usize) -> Option<usize> {
        self.blocks.get(&id).map(|b| b.tier(index))
    }

    /// Scalar count per tier, given the block lengths of `net`.
    pub fn counts(&self, net: &Network) -> Vec<usize> {
        let mut counts = vec![0; self.tier_count];
        for (&id, tiers) in &self.blocks {
            let len = net.param(id).map_or(0, |p| p.len());
            match tiers {
                BlockTiers::Uniform(t) => counts[*t] += len,
                BlockTiers::PerScalar(v) => v.iter().for_each(|&t| counts[t as usize] += 1),
            }
        }
        counts
    }

    /// Layers holding at least one scalar of `tier`.
    pub fn layers_with_tier(&self, tier: usize) -> BTreeSet<usize> {
        self.blocks
            .iter()
            .filter(|(_, b)| b.contains(tier))
            .map(|(id, _)| id.layer)
            .collect()
    }

    /// Checks that every scalar of `net` is assigned exactly once.
    pub fn validate(&self, net: &Network) -> Result<()> {
        let ids = net.param_ids();
        if ids.len() != self.blocks.len() || ids.iter().any(|id| !self.blocks.contains_key(id)) {
            return Err(Error::Contract("partition does not cover the network's parameter registry".into()));
        }
        for (&id, tiers) in &self.blocks {
            let len = net.param(id).expect("checked").len();
            match tiers {
                BlockTiers::Uniform(t) if *t >= self.tier_count => {
                    return Err(Error::Contract(format!("{id}: tier {t} out of range")))
                }
                BlockTiers::PerScalar(v) if v.len() != len => {
                    return Err(Error::Contract(format!("{id}: mask has {} entries for {len} scalars", v.len())))
                }
                BlockTiers::PerScalar(v) if v.iter().any(|&t| t as usize >= self.tier_count) => {
                    return Err(Error::Contract(format!("{id}: mask tier out of range")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Layer, LossKind};

    fn net(sizes: &[usize]) -> Network {
        let mut rng = RngStream::new(1, 0);
        let mut acts = vec![Activation::Tanh; sizes.len() - 2];
        acts.push(Activation::Softmax);
        Network::mlp(sizes, &acts, LossKind::CrossEntropy, &mut rng).unwrap()
    }

    #[test]
    fn layerwise_all_layers_is_all_fast() {
        let n = net(&[3, 4, 4, 2]);
        let p = Partition::layerwise(&n, 3).unwrap();
        assert_eq!(p.counts(&n), vec![n.num_params(), 0]);
        p.validate(&n).unwrap();
    }

    #[test]
    fn layerwise_last_layer_of_four() {
        let n = net(&[3, 4, 4, 4, 2]);
        let p = Partition::layerwise(&n, 1).unwrap();
        for id in n.param_ids() {
            assert_eq!(p.tier_of(id, 0), Some(usize::from(id.layer != 3)), "{id}");
        }
        assert_eq!(p.layers_with_tier(0), BTreeSet::from([3]));
    }

    #[test]
    fn layerwise_range_checked() {
        let n = net(&[3, 4, 2]);
        assert!(Partition::layerwise(&n, 0).is_err());
        assert!(Partition::layerwise(&n, 3).is_err());
    }

    #[test]
    fn bias_slow_counts_single_layer() {
        let mut rng = RngStream::new(2, 0);
        let n = Network::new(vec![Layer::dense(5, 3, true, Activation::Identity, &mut rng)], LossKind::MeanSquaredError).unwrap();
        let p = Partition::bias_slow(&n, BiasVariant::All);
        assert_eq!(p.counts(&n), vec![15, 3]);
    }

    #[test]
    fn bias_slow_input_only() {
        let n = net(&[2, 6, 2]);
        let p = Partition::bias_slow(&n, BiasVariant::InputOnly);
        assert_eq!(p.tier_of(ParamId::bias(0), 0), Some(1));
        assert_eq!(p.tier_of(ParamId::bias(1), 0), Some(0));
        assert_eq!(p.tier_of(ParamId::weight(0), 0), Some(0));
        let p = Partition::bias_slow(&n, BiasVariant::OutputOnly);
        assert_eq!(p.tier_of(ParamId::bias(0), 0), Some(0));
        assert_eq!(p.tier_of(ParamId::bias(1), 0), Some(1));
    }

    #[test]
    fn bias_slow_without_biases_is_empty_slow_set() {
        let mut rng = RngStream::new(2, 0);
        let n = Network::new(vec![Layer::dense(4, 2, false, Activation::Identity, &mut rng)], LossKind::MeanSquaredError).unwrap();
        let p = Partition::bias_slow(&n, BiasVariant::All);
        assert_eq!(p.counts(&n), vec![8, 0]);
    }

    #[test]
    fn random_subset_extremes() {
        let n = net(&[4, 8, 3]);
        let mut rng = RngStream::new(3, 0);
        let p = Partition::sample_random_subset(&n, &[0.0, 0.0], false, 5, &mut rng).unwrap();
        assert_eq!(p.counts(&n)[1], 0);
        let p = Partition::sample_random_subset(&n, &[1.0, 1.0], true, 5, &mut rng).unwrap();
        assert_eq!(p.counts(&n)[0], 0);
        assert_eq!(p.resample_period(), Some(5));
        // biases stay fast by default
        let p = Partition::sample_random_subset(&n, &[1.0, 1.0], false, 5, &mut rng).unwrap();
        assert_eq!(p.counts(&n), vec![8 + 3, 32 + 24]);
    }

    #[test]
    fn random_subset_rejects_bad_probability() {
        let n = net(&[4, 8, 3]);
        let mut rng = RngStream::new(3, 0);
        assert!(Partition::sample_random_subset(&n, &[0.5, 1.5], false, 5, &mut rng).is_err());
        assert!(Partition::sample_random_subset(&n, &[0.5], false, 5, &mut rng).is_err());
    }

    #[test]
    fn random_subset_fraction_within_binomial_band() {
        // 1e5 weights at p = 0.8: std of the fraction is sqrt(.16/1e5) ≈ 0.00126,
        // so [0.795, 0.805] is a ~4 sigma band.
        let mut rng = RngStream::new(4, 0);
        let n = Network::new(vec![Layer::dense(1000, 100, false, Activation::Identity, &mut rng)], LossKind::MeanSquaredError).unwrap();
        let p = Partition::sample_random_subset(&n, &[0.8], false, 5, &mut rng).unwrap();
        let frac = p.counts(&n)[1] as f64 / 100_000.0;
        assert!((0.795..=0.805).contains(&frac), "{frac}");
    }

    #[test]
    fn resampling_is_deterministic() {
        let n = net(&[4, 8, 3]);
        let a = Partition::sample_random_subset(&n, &[0.5, 0.5], false, 5, &mut RngStream::new(9, 2)).unwrap();
        let b = Partition::sample_random_subset(&n, &[0.5, 0.5], false, 5, &mut RngStream::new(9, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multi_tier_periods() {
        let s = TierSchedule::from_ratios(&[2, 3]).unwrap();
        assert_eq!(s.periods(), &[1, 2, 6]);
        let s = TierSchedule::from_ratios(&[]).unwrap();
        assert_eq!(s.periods(), &[1]);
        let tiers = TierSchedule::from_ratios(&[5]).unwrap().rate_tiers(0.02);
        assert_eq!(tiers[1].period, 5);
        assert!((tiers[1].stepsize - 0.1).abs() < 1e-15);
    }

    #[test]
    fn multi_tier_validation() {
        let n = net(&[3, 4, 4, 2]);
        let p = Partition::multi_tier(&n, &[vec![2], vec![1], vec![0]], &[2, 3]).unwrap();
        assert_eq!(p.tier_count(), 3);
        assert_eq!(p.tier_of(ParamId::weight(0), 0), Some(2));
        assert!(Partition::multi_tier(&n, &[vec![2, 1], vec![1, 0]], &[2]).is_err());
        assert!(Partition::multi_tier(&n, &[vec![2], vec![1]], &[2]).is_err());
        assert!(Partition::multi_tier(&n, &[vec![2], vec![1, 0]], &[]).is_err());
        let single = Partition::multi_tier(&n, &[vec![0, 1, 2]], &[]).unwrap();
        assert_eq!(single.counts(&n), vec![n.num_params()]);
    }

    #[test]
    fn period_law() {
        let s = TierSchedule::from_ratios(&[2, 3]).unwrap();
        let due: Vec<Vec<bool>> = (0..6).map(|t| (0..3).map(|i| s.is_due(i, t)).collect()).collect();
        assert_eq!(due[0], vec![true, true, true]);
        assert_eq!(due[1], vec![true, false, false]);
        assert_eq!(due[2], vec![true, true, false]);
        assert_eq!(due[4], vec![true, true, false]);
        assert_eq!(due[5], vec![true, false, false]);
    }
}
