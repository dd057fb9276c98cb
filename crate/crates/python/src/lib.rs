//! Python bindings. Actions are lists of rows, matrices are lists of lists.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use logdet_bandits::design::{self, FtrlObjective};
use logdet_bandits::harness::{self, ExperimentConfig};
use logdet_bandits::lifted::{self, ActionDistribution, ActionSet};
use logdet_bandits::meta;
use logdet_bandits::BanditError;

fn py_err(e: BanditError) -> PyErr {
    match e {
        BanditError::Config(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("matrix rows must be non-empty and equal length"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn action_set(actions: Vec<Vec<f64>>) -> PyResult<ActionSet> {
    ActionSet::from_rows(actions).map_err(py_err)
}

/// Lifted covariance of `p` over `actions`, a `(d+1)×(d+1)` matrix.
#[pyfunction]
fn lifted_cov(actions: Vec<Vec<f64>>, p: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let set = action_set(actions)?;
    let p = ActionDistribution::new(p).map_err(py_err)?;
    Ok(rows(lifted::lifted_cov(&p, &set).map_err(py_err)?.matrix()))
}

/// Bregman divergence of the log-det barrier, `D(G, H)`.
#[pyfunction]
fn bregman_div(g: Vec<Vec<f64>>, h: Vec<Vec<f64>>) -> PyResult<f64> {
    lifted::bregman_div(&matrix(g)?, &matrix(h)?).map_err(py_err)
}

/// G-optimal design; returns `(weights, max_leverage)`.
#[pyfunction]
#[pyo3(signature = (actions, tol = 1e-6))]
fn g_optimal_design(actions: Vec<Vec<f64>>, tol: f64) -> PyResult<(Vec<f64>, f64)> {
    let set = action_set(actions)?;
    let (nu, _) = design::g_optimal_design_default(&set, tol).map_err(py_err)?;
    let lev = design::max_leverage(&nu, &set).map_err(py_err)?;
    Ok((nu.weights().to_vec(), lev))
}

/// One FTRL step: minimize `⟨Cov(p), Z⟩ − log det Cov(p) / η` over the simplex.
#[pyfunction]
#[pyo3(signature = (actions, z, eta, tol = 1e-8, max_iter = 10_000))]
fn solve_ftrl_step(actions: Vec<Vec<f64>>, z: Vec<Vec<f64>>, eta: f64, tol: f64, max_iter: usize) -> PyResult<Vec<f64>> {
    let set = action_set(actions)?;
    let obj = FtrlObjective::new(matrix(z)?, eta).map_err(py_err)?;
    let (p, _) = design::solve_ftrl_step(&set, &obj, tol, max_iter).map_err(py_err)?;
    Ok(p.weights().to_vec())
}

#[pyfunction]
#[pyo3(signature = (losses, eta, floor))]
fn clamped_log_barrier_weights(losses: Vec<f64>, eta: f64, floor: f64) -> PyResult<Vec<f64>> {
    meta::clamped_log_barrier_weights(&losses, eta, floor).map_err(py_err)
}

/// Experiment configuration, round-tripped through TOML.
#[pyclass(name = "ExperimentConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_toml(text).map_err(py_err)?,
        })
    }

    /// A runnable default for `algorithm` (e.g. "logdet_ftrl", "exp4").
    #[staticmethod]
    fn example(algorithm: &str, d: usize, horizon: u64) -> PyResult<Self> {
        use harness::AlgorithmKind::*;
        let kind = [LogdetFtrl, Exp4, MisspecFtrl, Corral, UniformRandom]
            .into_iter()
            .find(|k| k.as_str() == algorithm)
            .ok_or_else(|| PyValueError::new_err(format!("unknown algorithm {algorithm:?}")))?;
        let inner = ExperimentConfig::example(kind, d, horizon);
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm.as_str()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.horizon
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }
}

/// Run one seed. Returns a dict with the regret summary, the regret curve
/// and the trace as CSV text.
#[pyfunction]
fn run_seed<'py>(py: Python<'py>, config: &PyConfig, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let run = harness::run_seed(&config.inner, seed).map_err(py_err)?;
    let mut csv = Vec::new();
    harness::emit_csv(&run.traces, &mut csv).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("seed", seed)?;
    out.set_item("learner_loss", run.report.learner_loss)?;
    out.set_item("comparator_loss", run.report.comparator_loss)?;
    out.set_item("regret", run.report.regret)?;
    out.set_item("curve", run.report.curve)?;
    out.set_item("csv", String::from_utf8(csv).map_err(|e| PyRuntimeError::new_err(e.to_string()))?)?;
    Ok(out)
}

/// Recompute `(learner_loss, comparator_loss, regret, max_column_error)`
/// from trace CSV text.
#[pyfunction]
fn oracle(csv: &str) -> PyResult<(f64, f64, f64, f64)> {
    let traces = harness::read_csv(csv.as_bytes()).map_err(py_err)?;
    let r = harness::oracle(&traces, None).map_err(py_err)?;
    Ok((r.learner_loss, r.comparator_loss, r.regret, r.max_column_error))
}

/// Invariant suites; returns `(all_passed, [(name, pass, value, threshold)])`.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn verify(seed: u64) -> (bool, Vec<(String, bool, f64, f64)>) {
    let rep = harness::verify_suites(seed);
    let rows = rep
        .rows
        .iter()
        .map(|r| (r.name.to_string(), r.pass, r.value, r.threshold))
        .collect();
    (rep.all_passed(), rows)
}

/// A learner built from a config, driven round by round from Python.
#[pyclass(name = "Learner", unsendable)]
struct PyLearner {
    inner: Box<dyn logdet_bandits::algorithms::Learner>,
}

#[pymethods]
impl PyLearner {
    #[new]
    fn new(config: &PyConfig, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: harness::build_learner(&config.inner, seed).map_err(py_err)?,
        })
    }

    /// Returns `(index, distribution)` on the given action set.
    fn select(&mut self, actions: Vec<Vec<f64>>) -> PyResult<(usize, Vec<f64>)> {
        let set = action_set(actions)?;
        let sel = self.inner.select(&set).map_err(py_err)?;
        Ok((sel.index, sel.distribution.weights().to_vec()))
    }

    fn update(&mut self, loss: f64) -> PyResult<()> {
        self.inner.update(loss).map_err(py_err)
    }

    fn discard(&mut self) {
        self.inner.discard();
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }
}

#[pymodule]
fn logdet_bandits_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(lifted_cov, m)?)?;
    m.add_function(wrap_pyfunction!(bregman_div, m)?)?;
    m.add_function(wrap_pyfunction!(g_optimal_design, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ftrl_step, m)?)?;
    m.add_function(wrap_pyfunction!(clamped_log_barrier_weights, m)?)?;
    m.add_function(wrap_pyfunction!(run_seed, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyLearner>()?;
    m.add("CSV_HEADER", harness::CSV_HEADER.join(","))?;
    Ok(())
}
