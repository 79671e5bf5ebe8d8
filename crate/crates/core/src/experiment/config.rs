use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::PatchSpec;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::optimizer::MultirateConfig;
use crate::partition::BiasVariant;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MULTIRATE_OUT";
/// Environment variable naming the MNIST directory when the config has none.
pub const MNIST_ENV: &str = "MULTIRATE_MNIST_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSet {
    Train,
    Test,
    Clean,
    PatchOnly,
    Augmented,
}

impl EvalSet {
    pub const ALL: [EvalSet; 5] = [EvalSet::Train, EvalSet::Test, EvalSet::Clean, EvalSet::PatchOnly, EvalSet::Augmented];

    pub fn name(self) -> &'static str {
        match self {
            EvalSet::Train => "train",
            EvalSet::Test => "test",
            EvalSet::Clean => "clean",
            EvalSet::PatchOnly => "patch_only",
            EvalSet::Augmented => "augmented",
        }
    }
}

fn unit() -> f64 {
    1.0
}

fn default_bumps() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Spiral {
        turns: f64,
        n_per_class: usize,
        test_per_class: usize,
        #[serde(default)]
        noise: f64,
        /// Multiplies every coordinate after generation; values above 1
        /// give unnormalized inputs.
        #[serde(default = "unit")]
        scale: f64,
        /// Fixed data seed; by default each run seed draws its own data.
        #[serde(default)]
        seed: Option<u64>,
    },
    Mnist {
        /// Directory with the four canonical IDX files.
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    /// Blob images with class patches; train set follows the recipe, test
    /// sets are clean, patch-only and recipe-augmented.
    Patch {
        n_train: usize,
        n_test: usize,
        #[serde(default)]
        recipe: PatchSpec,
        #[serde(default = "default_bumps")]
        bumps: usize,
        #[serde(default)]
        blob_noise: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl DatasetSpec {
    pub fn eval_sets(&self) -> &'static [EvalSet] {
        match self {
            DatasetSpec::Spiral { .. } | DatasetSpec::Mnist { .. } => &[EvalSet::Train, EvalSet::Test],
            DatasetSpec::Patch { .. } => &[EvalSet::Train, EvalSet::Clean, EvalSet::PatchOnly, EvalSet::Augmented],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// SGD with momentum on every parameter.
    Vanilla,
    /// Tiered stepping over the configured partition.
    Multirate,
    /// Random-subset cycles of `k` fast steps plus a joint step.
    RandomSubset,
    /// Fresh mask every step, no slow update.
    Remask,
    /// Two copies at `h/k` and `h`, averaged every `k` steps.
    Composite,
    /// Langevin-type stepping with additive noise.
    Noise,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    #[default]
    AllFast,
    Layerwise {
        fast_layers: usize,
    },
    BiasSlow {
        #[serde(default)]
        variant: BiasVariant,
    },
    RandomSubset {
        probabilities: Vec<f64>,
        #[serde(default)]
        include_biases: bool,
        #[serde(default = "one")]
        resample_period: usize,
    },
    MultiTier {
        groups: Vec<Vec<usize>>,
        ratios: Vec<usize>,
    },
}

fn default_gc_samples() -> usize {
    8
}

fn default_gc_eps() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    #[serde(default = "default_gc_samples")]
    pub samples: usize,
    #[serde(default = "default_gc_eps")]
    pub eps: f64,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        Self {
            samples: default_gc_samples(),
            eps: default_gc_eps(),
        }
    }
}

/// One fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub method: Method,
    #[serde(default)]
    pub epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    /// Accuracy columns to fill; defaults to every set the dataset offers.
    #[serde(default)]
    pub eval: Vec<EvalSet>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record the full-batch gradient norm² after each epoch.
    #[serde(default)]
    pub track_gradient: bool,
    /// Write a final checkpoint per seed.
    #[serde(default)]
    pub checkpoint: bool,
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub partition: PartitionSpec,
    pub optimizer: MultirateConfig,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
}

impl ExperimentConfig {
    /// Checks cross-field consistency that deserialization cannot.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.model.layers.is_empty() {
            return Err(Error::config("model.layers", "at least one layer is required"));
        }
        let offered = self.dataset.eval_sets();
        if let Some(e) = self.eval.iter().find(|e| !offered.contains(e)) {
            return Err(Error::config("eval", format!("`{}` is not available for this dataset", e.name())));
        }
        let tiers = match &self.partition {
            PartitionSpec::AllFast => 1,
            PartitionSpec::MultiTier { groups, .. } => groups.len().max(1),
            _ => 2,
        };
        let masked = matches!(self.partition, PartitionSpec::RandomSubset { .. });
        match self.method {
            Method::RandomSubset | Method::Remask if !masked => {
                return Err(Error::config("partition.kind", "this method needs a random_subset partition"));
            }
            Method::Multirate | Method::Noise if masked => {
                return Err(Error::config("partition.kind", "random_subset partitions need method random_subset or remask"));
            }
            Method::Noise if self.optimizer.noise.is_none() => {
                return Err(Error::config("optimizer.noise", "method noise needs a noise section"));
            }
            _ => {}
        }
        let opt_tiers = match self.method {
            Method::Vanilla => 1,
            Method::Composite | Method::RandomSubset | Method::Remask => 2,
            Method::Multirate | Method::Noise => tiers,
        };
        self.optimizer.validate(opt_tiers)?;
        if let DatasetSpec::Patch { recipe, .. } = &self.dataset {
            recipe
                .validate()
                .map_err(|e| Error::config("dataset.recipe", e.to_string()))?;
        }
        Ok(())
    }

    pub fn eval_sets(&self) -> Vec<EvalSet> {
        if self.eval.is_empty() {
            self.dataset.eval_sets().to_vec()
        } else {
            let mut sets = self.eval.clone();
            sets.sort();
            sets.dedup();
            sets
        }
    }

    /// Output directory: explicit override, then the config, then
    /// `$MULTIRATE_OUT/<name>`, then `runs/<name>`.
    pub fn output_dir(&self, out: Option<&Path>) -> PathBuf {
        if let Some(o) = out {
            return o.to_path_buf();
        }
        if let Some(o) = &self.output {
            return o.clone();
        }
        let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(&self.name)
    }
}

/// A config file expanded over its `[sweep]` table. Each sweep key is a
/// dotted path and maps to the list of values to try; several keys form a
/// grid.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub overrides: BTreeMap<String, toml::Value>,
    pub config: ExperimentConfig,
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::config("sweep", "empty key"))?;
    let mut cur = table;
    for (i, p) in parts.iter().enumerate() {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("sweep.\"{path}\""), format!("`{}` is not a table", parts[..=i].join("."))))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn decode(table: toml::Table) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".to_string() } else { path }, e.inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses config text and expands the sweep grid.
pub fn parse_config(text: &str) -> Result<Vec<SweepPoint>> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<syntax>", e.to_string()))?;
    let sweep = match table.remove("sweep") {
        None => toml::Table::new(),
        Some(toml::Value::Table(t)) => t,
        Some(_) => return Err(Error::config("sweep", "must be a table of dotted keys to value lists")),
    };
    let mut axes: Vec<(String, Vec<toml::Value>)> = Vec::new();
    for (key, values) in sweep {
        // `[sweep] optimizer.k = [..]` nests; flatten it back to a path
        flatten_sweep(&key, values, &mut axes)?;
    }
    let mut grid: Vec<BTreeMap<String, toml::Value>> = vec![BTreeMap::new()];
    for (key, values) in &axes {
        grid = grid
            .into_iter()
            .flat_map(|point| {
                values.iter().map(move |v| {
                    let mut p = point.clone();
                    p.insert(key.clone(), v.clone());
                    p
                })
            })
            .collect();
    }
    grid.into_iter()
        .map(|overrides| {
            let mut t = table.clone();
            for (k, v) in &overrides {
                set_path(&mut t, k, v.clone())?;
            }
            let label = overrides
                .iter()
                .map(|(k, v)| format!("{k}={}", render(v)))
                .collect::<Vec<_>>()
                .join(",");
            Ok(SweepPoint {
                label,
                overrides,
                config: decode(t)?,
            })
        })
        .collect()
}

fn flatten_sweep(prefix: &str, value: toml::Value, out: &mut Vec<(String, Vec<toml::Value>)>) -> Result<()> {
    match value {
        toml::Value::Array(values) if !values.is_empty() => {
            out.push((prefix.to_string(), values));
            Ok(())
        }
        toml::Value::Table(t) => {
            for (k, v) in t {
                flatten_sweep(&format!("{prefix}.{k}"), v, out)?;
            }
            Ok(())
        }
        _ => Err(Error::config(format!("sweep.{prefix}"), "expected a non-empty list of values")),
    }
}

fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn load_config(path: &Path) -> Result<Vec<SweepPoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
