use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use super::config::{EvalSet, ExperimentConfig, Method, PartitionSpec, SweepPoint};
use super::metrics::{write_metrics, MetricsRow};
use super::prepare::{prepare, Prepared};
use super::summary::{aggregate, PointSummary, Summary, SUMMARY_VERSION};
use crate::data::{BatchStream, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{RngStream, Tensor};
use crate::model::{accuracy, Checkpoint, Network};
use crate::optimizer::{
    composite_average_step, macro_step_wd, noise_step, random_subset_cycle, remask_step, schedule_for, vanilla_step,
    OptState,
};
use crate::partition::Partition;

const INIT_STREAM: u64 = 11;
const BATCH_STREAM: u64 = 12;
const EVAL_CHUNK: usize = 4096;

/// Outcome of training one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub rows: Vec<MetricsRow>,
    pub network: Network,
    pub partition: Option<Partition>,
    pub state: OptState,
}

/// Instantiates the configured partition; random-subset masks draw from
/// `rng`.
pub fn build_partition(spec: &PartitionSpec, net: &Network, rng: &mut RngStream) -> Result<Partition> {
    let part = match spec {
        PartitionSpec::AllFast => Ok(Partition::all_fast(net)),
        PartitionSpec::Layerwise { fast_layers } => Partition::layerwise(net, *fast_layers),
        PartitionSpec::BiasSlow { variant } => Ok(Partition::bias_slow(net, *variant)),
        PartitionSpec::RandomSubset {
            probabilities,
            include_biases,
            resample_period,
        } => Partition::sample_random_subset(net, probabilities, *include_biases, *resample_period, rng),
        PartitionSpec::MultiTier { groups, ratios } => Partition::multi_tier(net, groups, ratios),
    };
    part.map_err(|e| Error::config("partition", e.to_string()))
}

/// Mean loss and accuracy over a dataset, evaluated in chunks without
/// touching the cost counters.
pub fn evaluate(net: &Network, ds: &Dataset) -> Result<(f64, f64)> {
    let n = ds.len();
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let (mut loss, mut hits) = (0.0, 0.0);
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let batch = ds.batch(&idx);
        let out = net.predict(&batch.inputs)?;
        let m = idx.len() as f64;
        loss += m * net.loss().value(&out, &batch.targets)?;
        let labels: Vec<usize> = idx.iter().map(|&i| ds.labels()[i]).collect();
        hits += m * accuracy(&out, &labels);
    }
    Ok((loss / n as f64, hits / n as f64))
}

/// Squared norm of the full-batch gradient, on a scratch copy.
pub fn full_gradient_norm_sq(net: &Network, ds: &Dataset) -> Result<f64> {
    let mut probe = net.clone();
    let n = ds.len();
    let mut total: Vec<Tensor> = Vec::new();
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let batch = ds.batch(&idx);
        probe.forward(&batch.inputs)?;
        let grads = probe.backward_full(&batch.targets)?;
        let w = idx.len() as f64 / n as f64;
        for (i, g) in grads.values().enumerate() {
            if total.len() <= i {
                total.push(Tensor::zeros(g.shape()));
            }
            total[i].data_mut().iter_mut().zip(g.data()).for_each(|(t, v)| *t += w * v);
        }
    }
    Ok(total.iter().map(Tensor::norm_sq).sum())
}

enum Stepper {
    Single(OptState),
    Composite { b: Network, state_a: OptState, state_b: OptState },
}

/// Trains one seed and returns its per-epoch metrics.
pub fn run_seed(cfg: &ExperimentConfig, data: &Prepared, seed: u64) -> Result<SeedRun> {
    let sets = cfg.eval_sets();
    let mut init_rng = RngStream::new(seed, INIT_STREAM);
    let train = &data.train;
    let mut net = cfg.model.build(train.dim(), train.image_shape(), &mut init_rng)?;
    if net.output_dim() != train.classes() {
        return Err(Error::config(
            "model.layers",
            format!("network has {} outputs but the dataset has {} classes", net.output_dim(), train.classes()),
        ));
    }
    let mut stream = BatchStream::new(train.len(), cfg.batch_size, RngStream::new(seed, BATCH_STREAM))
        .map_err(|e| Error::config("batch_size", e.to_string()))?;
    let mut state = OptState::new(&net, seed);
    let mut partition = build_partition(&cfg.partition, &net, &mut state.mask_rng)?;
    let k = cfg.optimizer.k;
    let cycle = match cfg.method {
        Method::Vanilla | Method::Noise | Method::Remask => 1,
        Method::Multirate => schedule_for(&partition, &cfg.optimizer)?.cycle_len(),
        Method::RandomSubset => k + 1,
        Method::Composite => k,
    };
    let bpe = stream.batches_per_epoch();
    if bpe % cycle != 0 {
        return Err(Error::config(
            "batch_size",
            format!("{bpe} batches per epoch is not a multiple of the {cycle}-step cycle"),
        ));
    }
    let mut stepper = match cfg.method {
        Method::Composite => Stepper::Composite {
            b: net.clone(),
            state_b: OptState::new(&net, seed),
            state_a: state.clone(),
        },
        _ => Stepper::Single(state),
    };
    let resample_every = partition.resample_period().unwrap_or(1);
    let mut cycles = 0usize;
    let mut rows = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        for _ in 0..bpe / cycle {
            let batches: Vec<_> = (0..cycle).map(|_| train.batch(&stream.next_batch().0)).collect();
            match &mut stepper {
                Stepper::Single(st) => match cfg.method {
                    Method::Vanilla => vanilla_step(&mut net, st, &batches[0], &cfg.optimizer)?,
                    Method::Multirate => macro_step_wd(&mut net, st, &partition, &cfg.optimizer, &batches)?,
                    Method::Noise => {
                        let p = (partition.tier_count() > 1).then_some(&partition);
                        noise_step(&mut net, st, p, &cfg.optimizer, &batches[0])?
                    }
                    Method::Remask => remask_step(&mut net, st, &partition, &cfg.optimizer, &batches[0])?,
                    Method::RandomSubset => {
                        let next = random_subset_cycle(&mut net, st, &partition, &cfg.optimizer, &batches)?;
                        cycles += 1;
                        if cycles % resample_every == 0 {
                            partition = next;
                        }
                    }
                    Method::Composite => unreachable!("composite uses its own stepper"),
                },
                Stepper::Composite { b, state_a, state_b } => {
                    composite_average_step(&mut net, b, state_a, state_b, &cfg.optimizer, &batches)?
                }
            }
        }
        let (counters, micro) = match &stepper {
            Stepper::Single(st) => (net.counters, st.micro_steps),
            Stepper::Composite { b, state_a, .. } => (net.counters + b.counters, state_a.micro_steps),
        };
        let (train_loss, train_acc) = evaluate(&net, train)?;
        let mut row = MetricsRow::new(seed, epoch, micro, train_loss, counters);
        for &set in &sets {
            let acc = if set == EvalSet::Train {
                train_acc
            } else {
                let ds = data
                    .eval(set)
                    .ok_or_else(|| Error::config("eval", format!("`{}` is not available", set.name())))?;
                evaluate(&net, ds)?.1
            };
            row.set_accuracy(set, acc);
        }
        if cfg.track_gradient {
            row.grad_norm_sq = Some(full_gradient_norm_sq(&net, train)?);
        }
        info!(
            "{} seed {seed} epoch {epoch}: loss {train_loss:.5} acc {:?}",
            cfg.name,
            sets.iter().map(|&s| row.accuracy(s).unwrap_or(f64::NAN)).collect::<Vec<_>>()
        );
        rows.push(row);
    }
    let state = match stepper {
        Stepper::Single(st) => st,
        Stepper::Composite { state_a, .. } => state_a,
    };
    for w in &state.warnings {
        log::warn!("{}: {w}", cfg.name);
    }
    Ok(SeedRun {
        rows,
        network: net,
        partition: Some(partition),
        state,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs every sweep point and seed, writing `metrics_seed<S>.csv` files,
/// optional checkpoints and `summary.json` under the output directory.
/// Returns the summary and its path.
pub fn run_experiment(points: &[SweepPoint], out: Option<&Path>, seed_override: Option<u64>) -> Result<(Summary, PathBuf)> {
    let first = points.first().ok_or_else(|| Error::config("<root>", "no experiment to run"))?;
    let root = first.config.output_dir(out);
    create_dir(&root)?;
    let mut summaries = Vec::with_capacity(points.len());
    for (i, point) in points.iter().enumerate() {
        let cfg = &point.config;
        let seeds = seed_override.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
        let rel = if point.label.is_empty() {
            PathBuf::new()
        } else {
            PathBuf::from(format!("point{i:02}"))
        };
        let dir = root.join(&rel);
        create_dir(&dir)?;
        let mut runs = Vec::with_capacity(seeds.len());
        let mut files = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            let data = prepare(&cfg.dataset, seed)?;
            let run = run_seed(cfg, &data, seed)?;
            let name = format!("metrics_seed{seed}.csv");
            write_metrics(&dir.join(&name), &run.rows)?;
            if cfg.checkpoint {
                Checkpoint::new(run.network, run.partition, Some(run.state))
                    .save(&dir.join(format!("checkpoint_seed{seed}.json")))?;
            }
            files.push(rel.join(name).to_string_lossy().into_owned());
            runs.push(run.rows);
        }
        let (last, best) = aggregate(&runs, &cfg.eval_sets());
        let overrides = point
            .overrides
            .iter()
            .map(|(k, v)| Ok((k.clone(), serde_json::to_value(v)?)))
            .collect::<Result<_>>()?;
        summaries.push(PointSummary {
            label: point.label.clone(),
            overrides,
            seeds,
            epochs: cfg.epochs,
            metrics_files: files,
            last,
            best,
        });
    }
    let summary = Summary {
        version: SUMMARY_VERSION,
        name: first.config.name.clone(),
        method: first.config.method,
        points: summaries,
    };
    let path = root.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok((summary, path))
}
