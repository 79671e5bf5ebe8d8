use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};
use crate::optimizer::OptState;
use crate::partition::Partition;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Structured-text (JSON) snapshot of a training run.
///
/// Floats are written in shortest round-trip form, so loading reproduces
/// every parameter bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub network: Network,
    #[serde(default)]
    pub partition: Option<Partition>,
    #[serde(default)]
    pub optimizer: Option<OptState>,
}

impl Checkpoint {
    pub fn new(network: Network, partition: Option<Partition>, optimizer: Option<OptState>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            network,
            partition,
            optimizer,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("unsupported checkpoint version {}", ckpt.version),
            });
        }
        // re-validate layer composition
        let mut network =
            Network::new(ckpt.network.layers().to_vec(), ckpt.network.loss()).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        network.counters = ckpt.network.counters;
        Ok(Checkpoint { network, ..ckpt })
    }
}
