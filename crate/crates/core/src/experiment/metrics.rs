use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::EvalSet;
use crate::cost::CostCounters;
use crate::error::{Error, Result};

/// One line of a metrics CSV, written after each epoch. Accuracy columns
/// for sets the run does not evaluate are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub epoch: usize,
    pub micro_step: u64,
    pub train_loss: f64,
    pub acc_train: Option<f64>,
    pub acc_test: Option<f64>,
    pub acc_clean: Option<f64>,
    pub acc_patch_only: Option<f64>,
    pub acc_augmented: Option<f64>,
    pub grad_norm_sq: Option<f64>,
    pub forward_layer_visits: u64,
    pub backward_layer_visits: u64,
    pub flops: u64,
}

pub const METRICS_COLUMNS: [&str; 13] = [
    "seed",
    "epoch",
    "micro_step",
    "train_loss",
    "acc_train",
    "acc_test",
    "acc_clean",
    "acc_patch_only",
    "acc_augmented",
    "grad_norm_sq",
    "forward_layer_visits",
    "backward_layer_visits",
    "flops",
];

impl MetricsRow {
    pub fn new(seed: u64, epoch: usize, micro_step: u64, train_loss: f64, counters: CostCounters) -> Self {
        Self {
            seed,
            epoch,
            micro_step,
            train_loss,
            acc_train: None,
            acc_test: None,
            acc_clean: None,
            acc_patch_only: None,
            acc_augmented: None,
            grad_norm_sq: None,
            forward_layer_visits: counters.forward_layer_visits,
            backward_layer_visits: counters.backward_layer_visits,
            flops: counters.flops,
        }
    }

    pub fn accuracy(&self, set: EvalSet) -> Option<f64> {
        match set {
            EvalSet::Train => self.acc_train,
            EvalSet::Test => self.acc_test,
            EvalSet::Clean => self.acc_clean,
            EvalSet::PatchOnly => self.acc_patch_only,
            EvalSet::Augmented => self.acc_augmented,
        }
    }

    pub fn set_accuracy(&mut self, set: EvalSet, value: f64) {
        let slot = match set {
            EvalSet::Train => &mut self.acc_train,
            EvalSet::Test => &mut self.acc_test,
            EvalSet::Clean => &mut self.acc_clean,
            EvalSet::PatchOnly => &mut self.acc_patch_only,
            EvalSet::Augmented => &mut self.acc_augmented,
        };
        *slot = Some(value);
    }
}

/// Writes the header even when `rows` is empty.
pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(METRICS_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_COLUMNS {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected columns {header:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
