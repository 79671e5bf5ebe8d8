use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RngStream;

/// Endless sequence of minibatch index lists. Each epoch is a fresh shuffle
/// drawn from the stream's own RNG; the final short batch of an epoch is
/// kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStream {
    n: usize,
    batch_size: usize,
    rng: RngStream,
    order: Vec<usize>,
    pos: usize,
    epoch: usize,
}

impl BatchStream {
    pub fn new(n: usize, batch_size: usize, rng: RngStream) -> Result<Self> {
        if batch_size == 0 || batch_size > n {
            return Err(Error::Domain(format!("batch size must lie in 1..={n}, got {batch_size}")));
        }
        Ok(Self {
            n,
            batch_size,
            rng,
            order: Vec::new(),
            pos: n,
            epoch: 0,
        })
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.n.div_ceil(self.batch_size)
    }

    /// Whether the next call to `next_batch` starts a new epoch.
    pub fn at_epoch_boundary(&self) -> bool {
        self.pos >= self.n
    }

    /// Next index list; `true` when it closes an epoch.
    pub fn next_batch(&mut self) -> (Vec<usize>, bool) {
        if self.pos >= self.n {
            self.order = (0..self.n).collect();
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch_size).min(self.n);
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        let closed = end == self.n;
        if closed {
            self.epoch += 1;
        }
        (batch, closed)
    }

    /// All batches of the next epoch.
    pub fn next_epoch(&mut self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        loop {
            let (b, closed) = self.next_batch();
            out.push(b);
            if closed {
                return out;
            }
        }
    }
}

/// Batches of `epochs` epochs over `n` examples.
pub fn minibatch_iter(n: usize, batch_size: usize, epochs: usize, rng: RngStream) -> Result<Vec<Vec<Vec<usize>>>> {
    let mut stream = BatchStream::new(n, batch_size, rng)?;
    Ok((0..epochs).map(|_| stream.next_epoch()).collect())
}
