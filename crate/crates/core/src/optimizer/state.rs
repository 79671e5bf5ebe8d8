use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{RngStream, Tensor};
use crate::model::{Network, ParamId};
use crate::partition::Partition;

const MASK_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Momenta, step counters and random streams of one optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    #[serde(with = "crate::serde_util")]
    pub momenta: BTreeMap<ParamId, Tensor>,
    pub micro_steps: u64,
    pub macro_steps: u64,
    #[serde(with = "crate::serde_util::option", default)]
    stash: Option<BTreeMap<ParamId, Tensor>>,
    pub mask_rng: RngStream,
    pub noise_rng: RngStream,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl OptState {
    pub fn new(net: &Network, seed: u64) -> Self {
        let momenta = net
            .param_ids()
            .into_iter()
            .map(|id| (id, Tensor::zeros(net.param(id).expect("registered").shape())))
            .collect();
        Self {
            momenta,
            micro_steps: 0,
            macro_steps: 0,
            stash: None,
            mask_rng: RngStream::new(seed, MASK_STREAM),
            noise_rng: RngStream::new(seed, NOISE_STREAM),
            warnings: Vec::new(),
        }
    }

    pub fn momentum(&self, id: ParamId) -> Option<&Tensor> {
        self.momenta.get(&id)
    }

    pub fn has_stash(&self) -> bool {
        self.stash.is_some()
    }

    pub(crate) fn check_matches(&self, net: &Network) -> Result<()> {
        let ids = net.param_ids();
        let ok = ids.len() == self.momenta.len()
            && ids
                .iter()
                .all(|id| self.momenta.get(id).map(|p| p.shape()) == net.param(*id).map(|t| t.shape()));
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("optimizer momenta do not mirror the network parameters".into()))
        }
    }

    pub(crate) fn warn(&mut self, message: String) {
        if !self.warnings.contains(&message) {
            log::warn!("{message}");
            self.warnings.push(message);
        }
    }

    /// Saves the values of all slow (tier ≥ 1) scalars and sets them to zero.
    pub fn stash_slow(&mut self, net: &mut Network, partition: &Partition) -> Result<()> {
        if self.stash.is_some() {
            return Err(Error::State("slow parameters are already stashed".into()));
        }
        let mut stash = BTreeMap::new();
        for (&id, tiers) in partition.blocks() {
            if !(1..partition.tier_count()).any(|t| tiers.contains(t)) {
                continue;
            }
            let theta = net.param_mut(id).ok_or_else(|| Error::Contract(format!("{id} missing from network")))?;
            stash.insert(id, theta.clone());
            for (i, v) in theta.data_mut().iter_mut().enumerate() {
                if tiers.tier(i) != 0 {
                    *v = 0.0;
                }
            }
        }
        net.clear_cache();
        self.stash = Some(stash);
        Ok(())
    }

    /// Writes the stashed slow values back; fast scalars keep their current
    /// values.
    pub fn restore_slow(&mut self, net: &mut Network, partition: &Partition) -> Result<()> {
        let stash = self
            .stash
            .take()
            .ok_or_else(|| Error::State("restore requested but nothing is stashed".into()))?;
        for (id, saved) in stash {
            let tiers = partition
                .block(id)
                .ok_or_else(|| Error::Contract(format!("{id} missing from partition")))?;
            let theta = net.param_mut(id).ok_or_else(|| Error::Contract(format!("{id} missing from network")))?;
            for (i, (v, s)) in theta.data_mut().iter_mut().zip(saved.data()).enumerate() {
                if tiers.tier(i) != 0 {
                    *v = *s;
                }
            }
        }
        net.clear_cache();
        Ok(())
    }
}
