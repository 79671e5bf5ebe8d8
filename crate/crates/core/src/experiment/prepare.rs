use std::path::PathBuf;

use super::config::{DatasetSpec, EvalSet, MNIST_ENV};
use crate::data::{gen_blob_images, gen_patch_dataset, gen_spiral, load_mnist_dir, Dataset, PatchSpec};
use crate::error::{Error, Result};
use crate::linalg::RngStream;

const DATA_STREAM: u64 = 10;

/// Training data plus the evaluation sets it offers.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub evals: Vec<(EvalSet, Dataset)>,
}

impl Prepared {
    pub fn eval(&self, set: EvalSet) -> Option<&Dataset> {
        if set == EvalSet::Train {
            return Some(&self.train);
        }
        self.evals.iter().find(|(s, _)| *s == set).map(|(_, d)| d)
    }
}

fn limit(ds: Dataset, n: Option<usize>) -> Result<Dataset> {
    match n {
        Some(n) if n < ds.len() => ds.subset(&(0..n).collect::<Vec<_>>()),
        _ => Ok(ds),
    }
}

fn rescale(ds: Dataset, scale: f64) -> Result<Dataset> {
    if scale == 1.0 {
        return Ok(ds);
    }
    let mut inputs = ds.inputs().clone();
    inputs.data_mut().iter_mut().for_each(|v| *v *= scale);
    Dataset::new(inputs, ds.labels().to_vec(), ds.classes(), ds.source())
}

/// Builds the datasets for one run seed. Generated data uses the dataset's
/// own seed when set, else the run seed.
pub fn prepare(spec: &DatasetSpec, run_seed: u64) -> Result<Prepared> {
    match spec {
        DatasetSpec::Spiral {
            turns,
            n_per_class,
            test_per_class,
            noise,
            scale,
            seed,
        } => {
            let mut rng = RngStream::new(seed.unwrap_or(run_seed), DATA_STREAM);
            let train = rescale(gen_spiral(*turns, *n_per_class, *noise, &mut rng)?, *scale)?;
            let test = rescale(gen_spiral(*turns, *test_per_class, *noise, &mut rng)?, *scale)?;
            Ok(Prepared {
                train,
                evals: vec![(EvalSet::Test, test)],
            })
        }
        DatasetSpec::Mnist {
            dir,
            train_limit,
            test_limit,
        } => {
            let dir = dir
                .clone()
                .or_else(|| std::env::var_os(MNIST_ENV).map(PathBuf::from))
                .ok_or_else(|| Error::config("dataset.dir", format!("no MNIST directory given and {MNIST_ENV} is unset")))?;
            let (train, test) = load_mnist_dir(&dir)?;
            Ok(Prepared {
                train: limit(train, *train_limit)?,
                evals: vec![(EvalSet::Test, limit(test, *test_limit)?)],
            })
        }
        DatasetSpec::Patch {
            n_train,
            n_test,
            recipe,
            bumps,
            blob_noise,
            seed,
        } => {
            let mut rng = RngStream::new(seed.unwrap_or(run_seed), DATA_STREAM);
            let side = recipe.image_side;
            let base = gen_blob_images(*n_train, side, *bumps, *blob_noise, &mut rng)?;
            let train = gen_patch_dataset(recipe, Some(&base), *n_train, &mut rng)?.dataset;
            let clean = gen_blob_images(*n_test, side, *bumps, *blob_noise, &mut rng)?;
            let only_spec = PatchSpec {
                fractions: [0.0, 1.0, 0.0],
                ..recipe.clone()
            };
            let patch_only = gen_patch_dataset(&only_spec, Some(&clean), *n_test, &mut rng)?.dataset;
            let aug_base = gen_blob_images(*n_test, side, *bumps, *blob_noise, &mut rng)?;
            let augmented = gen_patch_dataset(recipe, Some(&aug_base), *n_test, &mut rng)?.dataset;
            Ok(Prepared {
                train,
                evals: vec![
                    (EvalSet::Clean, clean),
                    (EvalSet::PatchOnly, patch_only),
                    (EvalSet::Augmented, augmented),
                ],
            })
        }
    }
}
