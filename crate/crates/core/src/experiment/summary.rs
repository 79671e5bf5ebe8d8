use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{EvalSet, Method};
use super::metrics::MetricsRow;

pub const SUMMARY_VERSION: u32 = 1;

/// Mean, min and max of one quantity over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub per_seed: Vec<f64>,
}

impl Stat {
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            mean,
            min,
            max,
            per_seed: values,
        })
    }
}

/// Aggregates for one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub label: String,
    pub overrides: BTreeMap<String, serde_json::Value>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    /// Metrics files relative to the output directory, one per seed.
    pub metrics_files: Vec<String>,
    /// Last-epoch values: `train_loss` and `acc_<set>`.
    #[serde(rename = "final")]
    pub last: BTreeMap<String, Stat>,
    /// Best over epochs: lowest `train_loss`, highest `acc_<set>`.
    pub best: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: u32,
    pub name: String,
    pub method: Method,
    pub points: Vec<PointSummary>,
}

/// Reduces per-seed metric rows (in seed order) to final and best stats.
pub fn aggregate(runs: &[Vec<MetricsRow>], sets: &[EvalSet]) -> (BTreeMap<String, Stat>, BTreeMap<String, Stat>) {
    let mut last = BTreeMap::new();
    let mut best = BTreeMap::new();
    if runs.iter().any(Vec::is_empty) {
        return (last, best);
    }
    let mut put = |key: String, f: &dyn Fn(&MetricsRow) -> Option<f64>, lower_is_better: bool| {
        let finals: Option<Vec<f64>> = runs.iter().map(|r| f(r.last().expect("nonempty"))).collect();
        let bests: Option<Vec<f64>> = runs
            .iter()
            .map(|r| {
                let vals: Option<Vec<f64>> = r.iter().map(f).collect();
                vals.map(|v| {
                    if lower_is_better {
                        v.into_iter().fold(f64::INFINITY, f64::min)
                    } else {
                        v.into_iter().fold(f64::NEG_INFINITY, f64::max)
                    }
                })
            })
            .collect();
        if let Some(s) = finals.and_then(Stat::from_values) {
            last.insert(key.clone(), s);
        }
        if let Some(s) = bests.and_then(Stat::from_values) {
            best.insert(key, s);
        }
    };
    put("train_loss".into(), &|r| Some(r.train_loss), true);
    for &set in sets {
        put(format!("acc_{}", set.name()), &move |r| r.accuracy(set), false);
    }
    (last, best)
}
