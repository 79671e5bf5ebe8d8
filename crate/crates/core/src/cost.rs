//! Exact operation counting.
//!
//! Layer visits are the unit of the backward-pass cost model; FLOPs are
//! tracked alongside for reporting.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    pub forward_layer_visits: u64,
    pub backward_layer_visits: u64,
    pub flops: u64,
}

impl CostCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_flops(&mut self, flops: u64) {
        self.flops += flops;
    }

    /// Total layer visits, forward plus backward.
    pub fn layer_visits(&self) -> u64 {
        self.forward_layer_visits + self.backward_layer_visits
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

impl Add for CostCounters {
    type Output = CostCounters;

    fn add(self, rhs: CostCounters) -> CostCounters {
        CostCounters {
            forward_layer_visits: self.forward_layer_visits + rhs.forward_layer_visits,
            backward_layer_visits: self.backward_layer_visits + rhs.backward_layer_visits,
            flops: self.flops + rhs.flops,
        }
    }
}

impl Sub for CostCounters {
    type Output = CostCounters;

    /// Difference of two snapshots; `self` must be the later one.
    fn sub(self, rhs: CostCounters) -> CostCounters {
        CostCounters {
            forward_layer_visits: self.forward_layer_visits - rhs.forward_layer_visits,
            backward_layer_visits: self.backward_layer_visits - rhs.backward_layer_visits,
            flops: self.flops - rhs.flops,
        }
    }
}
