//! Python bindings for the DMAC library: the RLS estimator, gain
//! synthesis, exact discretization, and the preset experiment harness.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dmac::estimator::{batch_fit_weighted, SnapshotBatch};
use dmac::harness::{run_experiment, run_sweep, summarize, RunSummary, SweepCell};
use dmac::lqr::{build_augmented, compute_gains, LqrWeights};
use dmac::plants::zoh_discretize_exact;
use dmac::presets;
use dmac::{Estimator, EstimatorConfig};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if nrows == 0 || ncols == 0 {
        return Err(PyValueError::new_err("matrix must be non-empty"));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Online matrix RLS estimator of `Theta = [A B]` with forgetting.
#[pyclass(name = "Estimator")]
struct PyEstimator {
    inner: Estimator,
}

#[pymethods]
impl PyEstimator {
    #[new]
    fn new(state_dim: usize, input_dim: usize, forgetting: f64, r_theta_scale: f64) -> PyResult<Self> {
        let cfg = EstimatorConfig::scaled_identity(state_dim, input_dim, forgetting, r_theta_scale);
        Ok(Self { inner: Estimator::new(cfg).map_err(err)? })
    }

    /// One RLS step with the regressor `phi = [xi_prev; u_prev]` and the
    /// successor state `xi_next`.
    fn update(&mut self, phi: Vec<f64>, xi_next: Vec<f64>) -> PyResult<()> {
        self.inner
            .update(&DVector::from_vec(phi), &DVector::from_vec(xi_next))
            .map_err(err)
    }

    fn theta(&self) -> Vec<Vec<f64>> {
        from_matrix(self.inner.theta())
    }

    fn covariance(&self) -> Vec<Vec<f64>> {
        from_matrix(self.inner.covariance())
    }

    fn step_count(&self) -> usize {
        self.inner.step_count()
    }
}

/// Weighted batch least-squares fit of `Theta` from snapshot matrices
/// (columns are samples), equivalent to running the recursion.
#[pyfunction]
fn batch_fit(
    states: Vec<Vec<f64>>,
    inputs: Vec<Vec<f64>>,
    successors: Vec<Vec<f64>>,
    forgetting: f64,
    r_theta_scale: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let states = to_matrix(&states)?;
    let inputs = to_matrix(&inputs)?;
    let successors = to_matrix(&successors)?;
    let d = states.nrows() + inputs.nrows();
    let reg = DMatrix::identity(d, d) * r_theta_scale;
    let batch = SnapshotBatch::new(states, inputs, successors).map_err(err)?;
    let theta = batch_fit_weighted(&batch, forgetting, &reg).map_err(err)?;
    Ok(from_matrix(&theta))
}

/// LQR-with-integrator gains for the identified pair `(A, B)` and output
/// selector `C`: returns `(K_xi, K_q, spectral_radius)`.
#[pyfunction]
fn lqr_gains(
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    r1_scale: f64,
    r2: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> {
    let a = to_matrix(&a)?;
    let b = to_matrix(&b)?;
    let c = to_matrix(&c)?;
    let model = build_augmented(&a, &b, &c).map_err(err)?;
    let n = a.nrows() + c.nrows();
    let weights = LqrWeights {
        r1: DMatrix::identity(n, n) * r1_scale,
        r2: DMatrix::identity(b.ncols(), b.ncols()) * r2,
    };
    let gains = compute_gains(&model, &weights).map_err(err)?;
    Ok((from_matrix(&gains.k_xi), from_matrix(&gains.k_q), gains.spectral_radius))
}

/// Exact zero-order-hold discretization of continuous `(A, B)`.
#[pyfunction]
fn zoh_discretize(
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    sample_time: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let a = to_matrix(&a)?;
    let b = to_matrix(&b)?;
    let (ad, bd) = zoh_discretize_exact(&a, &b, sample_time).map_err(err)?;
    Ok((from_matrix(&ad), from_matrix(&bd)))
}

#[pyfunction]
fn list_presets() -> Vec<&'static str> {
    presets::PRESET_NAMES.to_vec()
}

fn summary_dict<'py>(py: Python<'py>, s: &RunSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &s.name)?;
    d.set_item("seed", s.seed)?;
    d.set_item("steps", s.steps)?;
    d.set_item("diverged", s.diverged)?;
    d.set_item("final_window_mean_abs_z", s.final_window_mean_abs_z)?;
    d.set_item("max_abs_u", s.max_abs_u)?;
    d.set_item("settle_step", s.settle_step)?;
    Ok(d)
}

/// Runs a preset closed-loop experiment with optional `key=value`
/// overrides and returns its summary as a dict.
#[pyfunction]
#[pyo3(signature = (name, seed=0, overrides=None))]
fn run_preset<'py>(
    py: Python<'py>,
    name: &str,
    seed: u64,
    overrides: Option<std::collections::HashMap<String, f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut spec = presets::preset(name).map_err(err)?;
    spec.seed = seed;
    for (k, v) in overrides.unwrap_or_default() {
        spec.set(&k, v).map_err(err)?;
    }
    let log = run_experiment(&spec).map_err(err)?;
    let summary = summarize(&log, spec.exploration_std).map_err(err)?;
    summary_dict(py, &summary)
}

/// Runs the named robustness sweep (`"hyper"` or `"physical"`) for a
/// preset and returns one dict per cell.
#[pyfunction]
#[pyo3(signature = (name, kind="hyper"))]
fn run_preset_sweep<'py>(
    py: Python<'py>,
    name: &str,
    kind: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let sweep = match kind {
        "hyper" => presets::hyperparameter_sweep(name).map_err(err)?,
        "physical" => presets::physical_sweep(name).map_err(err)?,
        other => return Err(PyValueError::new_err(format!("unknown sweep kind '{other}'"))),
    };
    let cells: Vec<SweepCell> = run_sweep(&sweep).map_err(err)?;
    cells
        .iter()
        .map(|c| {
            let d = summary_dict(py, &c.summary)?;
            d.set_item("param", &c.param)?;
            d.set_item("value", c.value)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn dmac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEstimator>()?;
    m.add_function(wrap_pyfunction!(batch_fit, m)?)?;
    m.add_function(wrap_pyfunction!(lqr_gains, m)?)?;
    m.add_function(wrap_pyfunction!(zoh_discretize, m)?)?;
    m.add_function(wrap_pyfunction!(list_presets, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset_sweep, m)?)?;
    Ok(())
}
