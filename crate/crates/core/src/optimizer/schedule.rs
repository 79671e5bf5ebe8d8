use serde::{Deserialize, Serialize};

/// Per-epoch linear decay from `initial` to zero over `epochs` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDecay {
    pub initial: f64,
    pub epochs: usize,
}

impl LinearDecay {
    pub fn stepsize(&self, epoch: usize) -> f64 {
        if self.epochs == 0 {
            return self.initial;
        }
        let left = self.epochs.saturating_sub(epoch) as f64 / self.epochs as f64;
        self.initial * left
    }
}
