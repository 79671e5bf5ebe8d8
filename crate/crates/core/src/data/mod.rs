//! Datasets: generators, MNIST ingestion, minibatching and binary export.

mod batch;
mod export;
mod mnist;
mod patch;
mod spiral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Tensor;
use crate::model::Batch;

pub use batch::{minibatch_iter, BatchStream};
pub use export::{read_dataset, write_dataset, EXPORT_MAGIC, EXPORT_VERSION};
pub use mnist::{load_mnist_dir, load_mnist_idx};
pub use patch::{gen_blob_images, gen_patch_dataset, PatchDataset, PatchKind, PatchMeta, PatchSpec, ZetaShape};
pub use spiral::gen_spiral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Spiral,
    Patch,
    Mnist,
    Synthetic,
}

impl Source {
    fn code(self) -> u8 {
        match self {
            Source::Spiral => 0,
            Source::Patch => 1,
            Source::Mnist => 2,
            Source::Synthetic => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        [Source::Spiral, Source::Patch, Source::Mnist, Source::Synthetic]
            .into_iter()
            .find(|s| s.code() == c)
    }
}

/// Labelled examples: `inputs` is `N × d`, labels lie in `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Tensor,
    labels: Vec<usize>,
    classes: usize,
    source: Source,
    /// `(channels, height, width)` when rows are flattened images.
    image: Option<(usize, usize, usize)>,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize, source: Source) -> Result<Self> {
        if inputs.rank() != 2 || inputs.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "inputs {:?} for {} labels",
                inputs.shape(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Domain("a dataset needs at least one example".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Domain(format!("label {bad} outside 0..{classes}")));
        }
        if !inputs.is_finite() {
            return Err(Error::Domain("inputs contain non-finite values".into()));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
            source,
            image: None,
        })
    }

    pub fn with_image_shape(mut self, channels: usize, height: usize, width: usize) -> Result<Self> {
        if channels * height * width != self.dim() {
            return Err(Error::Shape(format!(
                "image {channels}x{height}x{width} does not match {} features",
                self.dim()
            )));
        }
        self.image = Some((channels, height, width));
        Ok(self)
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn image_shape(&self) -> Option<(usize, usize, usize)> {
        self.image
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    /// One-hot targets for every row.
    pub fn targets(&self) -> Tensor {
        one_hot(&self.labels, self.classes)
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let labels: Vec<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        Batch::new(self.inputs.select_rows(indices), one_hot(&labels, self.classes))
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut out = Self::new(self.inputs.select_rows(indices), labels, self.classes, self.source)?;
        out.image = self.image;
        Ok(out)
    }

    /// Per-class example counts.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        self.labels.iter().for_each(|&l| h[l] += 1);
        h
    }
}

pub fn one_hot(labels: &[usize], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), classes]);
    let data = t.data_mut();
    for (r, &l) in labels.iter().enumerate() {
        data[r * classes + l] = 1.0;
    }
    t
}
