use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{EvalSet, ExperimentConfig};
use super::prepare::prepare;
use crate::analysis::{counted_speedup, speedup_ratio, verify_bound, visit_counts, BoundCheckConfig, BoundReport, LogisticRegression};
use crate::cost::CostCounters;
use crate::data::write_dataset;
use crate::error::{Error, Result};
use crate::linalg::RngStream;
use crate::model::{gradient_check, Activation, GradCheckReport, LossKind, Network};
use crate::model::Batch;
use crate::optimizer::{macro_step, vanilla_step, MultirateConfig, OptState};
use crate::partition::Partition;

/// Gradient check of the configured model on the first training samples of
/// the first seed.
pub fn gradcheck(cfg: &ExperimentConfig) -> Result<GradCheckReport> {
    let seed = cfg.seeds[0];
    let data = prepare(&cfg.dataset, seed)?;
    let mut net = cfg
        .model
        .build(data.train.dim(), data.train.image_shape(), &mut RngStream::new(seed, 11))?;
    let n = cfg.gradcheck.samples.clamp(1, data.train.len());
    let batch = data.train.batch(&(0..n).collect::<Vec<_>>());
    gradient_check(&mut net, &batch.inputs, &batch.targets, cfg.gradcheck.eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    #[serde(default)]
    pub flip: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Config of the `boundcheck` command: a synthetic logistic-regression
/// problem and the iteration to check on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCheckFile {
    pub problem: ProblemSpec,
    pub check: BoundCheckConfig,
}

impl BoundCheckFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<syntax>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))
    }

    pub fn problem(&self) -> Result<LogisticRegression> {
        let p = &self.problem;
        LogisticRegression::synthetic(p.n, p.d, p.lambda, p.flip, &mut RngStream::new(p.seed, 0))
            .map_err(|e| Error::config("problem", e.to_string()))
    }
}

pub fn boundcheck(file: &BoundCheckFile) -> Result<BoundReport> {
    let problem = file.problem()?;
    verify_bound(&problem, &file.check).map_err(|e| match e {
        Error::Domain(m) => Error::config("check", m),
        other => other,
    })
}

/// Counted and analytic cost ratios for one `(k, L, ℓ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub k: usize,
    pub layers: usize,
    pub fast: usize,
    pub full: CostCounters,
    pub multirate: CostCounters,
    /// Analytic `(2kL, kL + L + (k−1)ℓ)`.
    pub analytic_visits: (u64, u64),
    pub counted: f64,
    pub analytic: f64,
    pub exact: bool,
}

/// Dry run: `k` full SGD steps against one multirate macro step with the
/// last `fast` of `layers` layers fast, counting layer visits.
pub fn cost_dry_run(k: usize, layers: usize, fast: usize) -> Result<CostRow> {
    let analytic = speedup_ratio(k, layers, fast)?;
    let analytic_visits = visit_counts(k, layers, fast)?;
    let mut rng = RngStream::new(0, 0);
    let sizes = vec![2; layers + 1];
    let mut acts = vec![Activation::Tanh; layers - 1];
    acts.push(Activation::Softmax);
    let net = Network::mlp(&sizes, &acts, LossKind::CrossEntropy, &mut rng)?;
    let batches: Vec<Batch> = (0..k)
        .map(|i| {
            let x = crate::linalg::Tensor::new(vec![1, 2], vec![rng.standard_normal(), rng.standard_normal()])?;
            let mut y = crate::linalg::Tensor::zeros(&[1, 2]);
            y.data_mut()[i % 2] = 1.0;
            Ok(Batch::new(x, y))
        })
        .collect::<Result<_>>()?;
    let cfg = MultirateConfig::new(0.1, k, 0.9);

    let mut full_net = net.clone();
    let mut st = OptState::new(&full_net, 0);
    for b in &batches {
        vanilla_step(&mut full_net, &mut st, b, &cfg)?;
    }
    let mut multi_net = net;
    let part = Partition::layerwise(&multi_net, fast)?;
    let mut st = OptState::new(&multi_net, 0);
    macro_step(&mut multi_net, &mut st, &part, &cfg, &batches)?;

    let (full, multirate) = (full_net.counters, multi_net.counters);
    let counted = counted_speedup(&full, &multirate)?;
    let exact = (full.layer_visits(), multirate.layer_visits()) == analytic_visits && counted == analytic;
    Ok(CostRow {
        k,
        layers,
        fast,
        full,
        multirate,
        analytic_visits,
        counted,
        analytic,
        exact,
    })
}

/// Writes the training and evaluation sets of every seed as binary files
/// named `<set>_seed<S>.mrds`. Returns the written paths.
pub fn gendata(cfg: &ExperimentConfig, out: &Path, seeds: &[u64]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for &seed in seeds {
        let data = prepare(&cfg.dataset, seed)?;
        for set in EvalSet::ALL {
            if let Some(ds) = data.eval(set) {
                let path = out.join(format!("{}_seed{seed}.mrds", set.name()));
                write_dataset(ds, &path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
