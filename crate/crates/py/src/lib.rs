//! Python bindings. Structured results (reports, path records, metrics) are
//! handed over as plain dicts and lists.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use sifs::estimation::{ReferencePoint, ScreeningState};
use sifs::harness::{compute_metrics, run_path as core_run_path, PathConfig, RunRecord};
use sifs::objective::{dual_gradient as core_dual_gradient, dual_objective as core_dual_objective};
use sifs::objective::{duality_gap as core_duality_gap, primal_objective as core_primal_objective};
use sifs::screening::{screen as core_screen, ScreenOrder, ScreeningMode};
use sifs::solver::{solve as core_solve, SolverConfig};
use sifs::verification::{certify as core_certify, oracle_solve};
use sifs::{build_grid, closed_form_reference, GridSpec, SifsError, SolutionPair, SynthSpec};

fn to_py(e: SifsError) -> PyErr {
    match e {
        SifsError::Io(e) => PyIOError::new_err(e.to_string()),
        SifsError::NonConvergence { .. } | SifsError::Invariant(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_object<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_enum<T: serde::de::DeserializeOwned>(name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown option {name:?}")))
}

/// Sparse dataset with labels folded into the samples.
#[pyclass(name = "Dataset", frozen)]
pub struct PyDataset {
    inner: sifs::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Dense `x` given as `n` rows of `p` features, labels in {-1, +1}.
    #[staticmethod]
    fn from_dense(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Self> {
        if x.len() != y.len() {
            return Err(PyValueError::new_err(format!("{} rows but {} labels", x.len(), y.len())));
        }
        let p = x.first().map_or(0, Vec::len);
        let mut rows = vec![vec![0.0; y.len()]; p];
        for (i, (xi, &yi)) in x.iter().zip(&y).enumerate() {
            if xi.len() != p {
                return Err(PyValueError::new_err(format!("row {i} has {} features, expected {p}", xi.len())));
            }
            for (j, &v) in xi.iter().enumerate() {
                rows[j][i] = yi * v;
            }
        }
        sifs::Dataset::from_signed_dense(&rows, y).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (path, n_features=None))]
    fn load_libsvm(path: &str, n_features: Option<usize>) -> PyResult<Self> {
        sifs::load_libsvm(path, n_features).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (text, n_features=None))]
    fn parse_libsvm(text: &str, n_features: Option<usize>) -> PyResult<Self> {
        sifs::parse_libsvm(text.as_bytes(), n_features).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (n, p, seed=0, eta=None))]
    fn synthetic(n: usize, p: usize, seed: u64, eta: Option<f64>) -> PyResult<Self> {
        let mut spec = SynthSpec::new(n, p, seed);
        if let Some(eta) = eta {
            spec.eta = eta;
        }
        sifs::generate_synthetic(&spec).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_libsvm(&self) -> String {
        sifs::datamodel::serialize_libsvm(&self.inner)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    #[getter]
    fn labels(&self) -> Vec<f64> {
        self.inner.labels().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={}, nnz={})", self.inner.n(), self.inner.p(), self.inner.nnz())
    }
}

#[pyclass(name = "Params", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyParams {
    inner: sifs::Params,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (alpha, beta, gamma=0.5))]
    fn new(alpha: f64, beta: f64, gamma: f64) -> PyResult<Self> {
        sifs::Params::new(alpha, beta, gamma).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    fn __repr__(&self) -> String {
        format!("Params(alpha={}, beta={}, gamma={})", self.inner.alpha, self.inner.beta, self.inner.gamma)
    }
}

fn state_from(d: &sifs::Dataset, features: &[usize], r: &[usize], l: &[usize]) -> PyResult<ScreeningState> {
    ScreeningState::from_sets(d.p(), d.n(), features, r, l).map_err(to_py)
}

#[pyfunction]
fn beta_max(d: PyRef<'_, PyDataset>) -> f64 {
    sifs::beta_max(&d.inner)
}

#[pyfunction]
#[pyo3(signature = (d, beta, gamma=0.5))]
fn alpha_max(d: PyRef<'_, PyDataset>, beta: f64, gamma: f64) -> f64 {
    sifs::alpha_max(&d.inner, beta, gamma)
}

/// Exact `(w, theta)` for `alpha >= alpha_max(beta)`.
#[pyfunction]
fn closed_form(d: PyRef<'_, PyDataset>, prm: PyParams) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = prm.inner;
    let pair = closed_form_reference(&d.inner, p.alpha, p.beta, p.gamma).map_err(to_py)?;
    Ok((pair.w, pair.theta))
}

#[pyfunction]
fn primal_objective(d: PyRef<'_, PyDataset>, w: Vec<f64>, prm: PyParams) -> PyResult<f64> {
    core_primal_objective(&d.inner, &w, &prm.inner).map_err(to_py)
}

#[pyfunction]
fn dual_objective(d: PyRef<'_, PyDataset>, theta: Vec<f64>, prm: PyParams) -> PyResult<f64> {
    core_dual_objective(&d.inner, &theta, &prm.inner).map_err(to_py)
}

#[pyfunction]
fn dual_gradient(d: PyRef<'_, PyDataset>, theta: Vec<f64>, prm: PyParams) -> PyResult<Vec<f64>> {
    core_dual_gradient(&d.inner, &theta, &prm.inner).map_err(to_py)
}

/// Dict with `primal_value`, `dual_value` and `gap`.
#[pyfunction]
fn duality_gap<'py>(
    py: Python<'py>,
    d: PyRef<'_, PyDataset>,
    w: Vec<f64>,
    theta: Vec<f64>,
    prm: PyParams,
) -> PyResult<Bound<'py, PyAny>> {
    let report = core_duality_gap(&d.inner, &SolutionPair { w, theta }, &prm.inner).map_err(to_py)?;
    to_object(py, &report)
}

/// Screens at `alpha` from a reference solution at `(ref_alpha, beta)`.
/// Returns a dict with the screened `features`, `r` (theta = 0) and `l`
/// (theta = 1) index lists plus the trigger log.
#[pyfunction]
#[pyo3(signature = (d, ref_alpha, beta, ref_w, ref_theta, alpha, gamma=0.5, mode="sifs", order="iss-first"))]
#[allow(clippy::too_many_arguments)]
fn screen<'py>(
    py: Python<'py>,
    d: PyRef<'_, PyDataset>,
    ref_alpha: f64,
    beta: f64,
    ref_w: Vec<f64>,
    ref_theta: Vec<f64>,
    alpha: f64,
    gamma: f64,
    mode: &str,
    order: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mode: ScreeningMode = parse_enum(mode)?;
    let order: ScreenOrder = parse_enum(order)?;
    let reference = ReferencePoint { alpha: ref_alpha, beta, pair: SolutionPair { w: ref_w, theta: ref_theta } };
    let (state, report) = core_screen(&d.inner, &reference, alpha, gamma, mode, order).map_err(to_py)?;
    to_object(
        py,
        &serde_json::json!({
            "features": state.f_hat(),
            "r": state.r_hat(),
            "l": state.l_hat(),
            "triggers": report.total_triggers,
            "rounds": report.rounds,
            "clamped_balls": report.clamped_balls,
        }),
    )
}

/// Solves with the given screened sets. `gap_tol` is relative to `P(0)`.
#[pyfunction]
#[pyo3(signature = (d, prm, features=vec![], r=vec![], l=vec![], warm=None, gap_tol=1e-8, max_epochs=20000))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    d: PyRef<'_, PyDataset>,
    prm: PyParams,
    features: Vec<usize>,
    r: Vec<usize>,
    l: Vec<usize>,
    warm: Option<Vec<f64>>,
    gap_tol: f64,
    max_epochs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let state = state_from(&d.inner, &features, &r, &l)?;
    let cfg = SolverConfig { max_epochs, ..SolverConfig::relative(gap_tol, prm.inner.gamma) };
    let data = &d.inner;
    let res = py
        .detach(|| core_solve(data, &prm.inner, &state, warm.as_deref(), &cfg))
        .map_err(to_py)?;
    to_object(
        py,
        &serde_json::json!({ "w": res.pair.w, "theta": res.pair.theta, "gap": res.gap, "epochs": res.epochs }),
    )
}

/// High-accuracy solution with the exact inactive sets.
#[pyfunction]
fn oracle<'py>(py: Python<'py>, d: PyRef<'_, PyDataset>, prm: PyParams) -> PyResult<Bound<'py, PyAny>> {
    let data = &d.inner;
    let sol = py.detach(|| oracle_solve(data, &prm.inner)).map_err(to_py)?;
    to_object(py, &sol)
}

/// Checks screened sets against the oracle at `prm`.
#[pyfunction]
#[pyo3(signature = (d, prm, features=vec![], r=vec![], l=vec![]))]
fn certify<'py>(
    py: Python<'py>,
    d: PyRef<'_, PyDataset>,
    prm: PyParams,
    features: Vec<usize>,
    r: Vec<usize>,
    l: Vec<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let state = state_from(&d.inner, &features, &r, &l)?;
    let data = &d.inner;
    let sol = py.detach(|| oracle_solve(data, &prm.inner)).map_err(to_py)?;
    to_object(py, &core_certify(&state, &sol))
}

/// Runs the grid path and returns one record dict per grid point.
#[pyfunction]
#[pyo3(signature = (d, mode="sifs", gamma=0.5, beta_fracs=None, alpha_fracs=None, verify=false, threads=None, keep_w=false))]
#[allow(clippy::too_many_arguments)]
fn run_path<'py>(
    py: Python<'py>,
    d: PyRef<'_, PyDataset>,
    mode: &str,
    gamma: f64,
    beta_fracs: Option<Vec<f64>>,
    alpha_fracs: Option<Vec<f64>>,
    verify: bool,
    threads: Option<usize>,
    keep_w: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let mode: ScreeningMode = parse_enum(mode)?;
    let default = GridSpec::default();
    let spec = GridSpec {
        beta_fracs: beta_fracs.unwrap_or(default.beta_fracs),
        alpha_fracs: alpha_fracs.unwrap_or(default.alpha_fracs),
    };
    let grid = build_grid(&d.inner, &spec, gamma).map_err(to_py)?;
    let mut cfg = PathConfig::new(gamma);
    cfg.verify = verify;
    if threads.is_some() {
        cfg.threads = threads;
    }
    let data = &d.inner;
    let records = py.detach(|| core_run_path(data, &grid, mode, &cfg, keep_w)).map_err(to_py)?;
    to_object(py, &records)
}

/// Scaling ratios, rejection ratios and timings from path records.
#[pyfunction]
#[pyo3(signature = (records, oracle=None))]
fn metrics<'py>(
    py: Python<'py>,
    records: &Bound<'py, PyAny>,
    oracle: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<RunRecord> = from_object(records)?;
    let oracle: Option<Vec<RunRecord>> = oracle.map(from_object).transpose()?;
    to_object(py, &compute_metrics(&records, oracle.as_deref()))
}

#[pymodule]
pub fn sifs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(beta_max, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_max, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(primal_objective, m)?)?;
    m.add_function(wrap_pyfunction!(dual_objective, m)?)?;
    m.add_function(wrap_pyfunction!(dual_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(duality_gap, m)?)?;
    m.add_function(wrap_pyfunction!(screen, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(run_path, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    Ok(())
}
