//! Python bindings: cost and bound formulas, spiral data, config-driven
//! experiment runs and a small stateful trainer.

use std::path::PathBuf;

use multirate::analysis::{self, BoundInputs};
use multirate::data;
use multirate::experiment;
use multirate::linalg::{RngStream, Tensor};
use multirate::model::{accuracy, Activation, Batch, LossKind, Network};
use multirate::optimizer::{macro_step, MultirateConfig, OptState};
use multirate::partition::{BiasVariant, Partition};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: multirate::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Tensor> {
    Tensor::from_rows(rows).map_err(py_err)
}

fn to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn activation(name: &str) -> PyResult<Activation> {
    Ok(match name {
        "identity" => Activation::Identity,
        "relu" => Activation::Relu,
        "tanh" => Activation::Tanh,
        "softmax" => Activation::Softmax,
        other => return Err(PyValueError::new_err(format!("unknown activation {other:?}"))),
    })
}

/// Full-to-multirate cost ratio `2kL / ((k+1)L + (k-1)l)`.
#[pyfunction]
fn speedup_ratio(k: usize, layers: usize, fast: usize) -> PyResult<f64> {
    analysis::speedup_ratio(k, layers, fast).map_err(py_err)
}

/// Layer visits `(full, multirate)` over one macro step.
#[pyfunction]
fn visit_counts(k: usize, layers: usize, fast: usize) -> PyResult<(u64, u64)> {
    analysis::visit_counts(k, layers, fast).map_err(py_err)
}

#[allow(clippy::too_many_arguments)]
fn bound_inputs(
    h: f64,
    iterations: usize,
    k: usize,
    lipschitz: f64,
    second_moment: f64,
    groups: usize,
    f0: f64,
    fstar: f64,
) -> BoundInputs {
    BoundInputs {
        h,
        iterations,
        k,
        lipschitz,
        second_moment,
        groups,
        f0,
        fstar,
    }
}

/// Multirate bound on the averaged squared gradient norm.
#[pyfunction]
#[pyo3(signature = (h, iterations, k, lipschitz, second_moment, f0, fstar, groups = 2))]
#[allow(clippy::too_many_arguments)]
fn multirate_bound(
    h: f64,
    iterations: usize,
    k: usize,
    lipschitz: f64,
    second_moment: f64,
    f0: f64,
    fstar: f64,
    groups: usize,
) -> PyResult<f64> {
    let b = bound_inputs(h, iterations, k, lipschitz, second_moment, groups, f0, fstar);
    analysis::theorem1_bound(&b).map_err(py_err)
}

/// Vanilla SGD bound with the same constants.
#[pyfunction]
fn sgd_bound(h: f64, iterations: usize, lipschitz: f64, second_moment: f64, f0: f64, fstar: f64) -> PyResult<f64> {
    let b = bound_inputs(h, iterations, 1, lipschitz, second_moment, 1, f0, fstar);
    analysis::sgd_bound(&b).map_err(py_err)
}

/// Two-arm spiral as `(points, labels)`.
#[pyfunction]
#[pyo3(signature = (turns, n_per_class, noise = 0.0, seed = 0))]
fn spiral(turns: f64, n_per_class: usize, noise: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let ds = data::gen_spiral(turns, n_per_class, noise, &mut RngStream::new(seed, 10)).map_err(py_err)?;
    Ok((to_rows(ds.inputs()), ds.labels().to_vec()))
}

/// Runs a TOML experiment config and returns the summary as JSON.
#[pyfunction]
#[pyo3(signature = (config, out, seed = None))]
fn run_config(py: Python<'_>, config: &str, out: PathBuf, seed: Option<u64>) -> PyResult<String> {
    let points = experiment::parse_config(config).map_err(py_err)?;
    let (summary, _) = py
        .detach(|| experiment::run_experiment(&points, Some(&out), seed))
        .map_err(py_err)?;
    serde_json::to_string(&summary).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// An MLP with its optimizer state and partition.
#[pyclass]
struct Trainer {
    net: Network,
    state: OptState,
    partition: Partition,
    cfg: MultirateConfig,
}

#[pymethods]
impl Trainer {
    /// `partition` is one of `all_fast`, `bias_slow` or `layerwise:<n>`.
    #[new]
    #[pyo3(signature = (sizes, activations, stepsize, k = 1, momentum = 0.0, partition = "all_fast", drift = true, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        sizes: Vec<usize>,
        activations: Vec<String>,
        stepsize: f64,
        k: usize,
        momentum: f64,
        partition: &str,
        drift: bool,
        seed: u64,
    ) -> PyResult<Self> {
        let acts = activations.iter().map(|a| activation(a)).collect::<PyResult<Vec<_>>>()?;
        let loss = if acts.last() == Some(&Activation::Softmax) {
            LossKind::CrossEntropy
        } else {
            LossKind::MeanSquaredError
        };
        let net = Network::mlp(&sizes, &acts, loss, &mut RngStream::new(seed, 11)).map_err(py_err)?;
        let partition = match partition {
            "all_fast" => Partition::all_fast(&net),
            "bias_slow" => Partition::bias_slow(&net, BiasVariant::All),
            other => match other.strip_prefix("layerwise:").and_then(|n| n.parse().ok()) {
                Some(n) => Partition::layerwise(&net, n).map_err(py_err)?,
                None => return Err(PyValueError::new_err(format!("unknown partition {other:?}"))),
            },
        };
        let mut cfg = MultirateConfig::new(stepsize, k, momentum);
        cfg.drift = drift;
        cfg.validate(partition.tier_count()).map_err(py_err)?;
        let state = OptState::new(&net, seed);
        Ok(Self {
            net,
            state,
            partition,
            cfg,
        })
    }

    /// One macro step over `k` minibatches of `(inputs, one_hot_targets)`.
    fn step(&mut self, batches: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)>) -> PyResult<()> {
        let batches = batches
            .iter()
            .map(|(x, y)| Ok(Batch::new(matrix(x)?, matrix(y)?)))
            .collect::<PyResult<Vec<_>>>()?;
        macro_step(&mut self.net, &mut self.state, &self.partition, &self.cfg, &batches).map_err(py_err)
    }

    fn predict(&self, inputs: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&self.net.predict(&matrix(&inputs)?).map_err(py_err)?))
    }

    fn loss(&self, inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> PyResult<f64> {
        self.net.loss_eval(&matrix(&inputs)?, &matrix(&targets)?).map_err(py_err)
    }

    fn accuracy(&self, inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
        Ok(accuracy(&self.net.predict(&matrix(&inputs)?).map_err(py_err)?, &labels))
    }

    fn params(&self) -> Vec<f64> {
        self.net.flat_params()
    }

    #[getter]
    fn micro_steps(&self) -> u64 {
        self.state.micro_steps
    }
}

#[pymodule]
fn multirate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(speedup_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(visit_counts, m)?)?;
    m.add_function(wrap_pyfunction!(multirate_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sgd_bound, m)?)?;
    m.add_function(wrap_pyfunction!(spiral, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_class::<Trainer>()?;
    Ok(())
}
