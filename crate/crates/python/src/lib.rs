//! Python bindings: parameter classes, simulation runs, limit laws, tail
//! fits and the acceptance criteria.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use scorelaw::analytic;
use scorelaw::graph;
use scorelaw::model_s;
use scorelaw::stats::{self, FitMethod, FitOptions, FitReport};
use scorelaw::Histogram;

fn to_py(e: scorelaw::Error) -> PyErr {
    use scorelaw::Error as E;
    match e {
        E::Param(_) | E::Domain(_) | E::Usage(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "SimParams", from_py_object)]
#[derive(Clone)]
struct PySimParams {
    inner: model_s::SimParams,
}

#[pymethods]
impl PySimParams {
    #[new]
    #[pyo3(signature = (a, b, m, t, u, seed = 0, n0 = 1))]
    fn new(a: f64, b: f64, m: f64, t: u32, u: u64, seed: u64, n0: u64) -> PyResult<Self> {
        let mut inner = model_s::SimParams::new(a, b, m, t, u).with_seed(seed);
        inner.n0 = n0;
        inner.validate().map_err(to_py)?;
        Ok(PySimParams { inner })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }
    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }
    #[getter]
    fn m(&self) -> f64 {
        self.inner.m
    }
    #[getter]
    fn t(&self) -> u32 {
        self.inner.t
    }
    #[getter]
    fn u(&self) -> u64 {
        self.inner.u
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("SimParams(a={}, b={}, m={}, t={}, u={}, seed={})", p.a, p.b, p.m, p.t, p.u, p.seed)
    }
}

/// A score histogram taken at step `n`.
#[pyclass(name = "Histogram", skip_from_py_object)]
struct PyHistogram {
    inner: Histogram,
}

#[pymethods]
impl PyHistogram {
    #[getter]
    fn n(&self) -> u64 {
        self.inner.n
    }

    #[getter]
    fn counts(&self) -> BTreeMap<u64, u64> {
        self.inner.counts.clone()
    }

    fn total(&self) -> u64 {
        self.inner.total()
    }

    fn get(&self, s: u64) -> u64 {
        self.inner.get(s)
    }

    /// Counts divided by `n`.
    fn normalized(&self, n: u64) -> BTreeMap<u64, f64> {
        stats::normalize(&self.inner, n)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.counts.len()
    }

    fn __repr__(&self) -> String {
        format!("Histogram(n={}, total={})", self.inner.n, self.inner.total())
    }
}

/// A live population that can be stepped from Python.
#[pyclass(name = "ScoreTable", skip_from_py_object)]
struct PyScoreTable {
    inner: model_s::ScoreTable,
}

#[pymethods]
impl PyScoreTable {
    #[new]
    fn new(params: PySimParams) -> PyResult<Self> {
        Ok(PyScoreTable { inner: model_s::init_population(params.inner).map_err(to_py)? })
    }

    /// Advances one step; returns `(score_increase, births, clamped)`.
    fn step(&mut self) -> (u32, u32, bool) {
        let s = self.inner.step();
        (s.score_increase, s.births, s.clamped)
    }

    #[getter]
    fn step_index(&self) -> u64 {
        self.inner.step_index()
    }

    #[getter]
    fn population(&self) -> usize {
        self.inner.population()
    }

    #[getter]
    fn total_weight(&self) -> f64 {
        self.inner.total_weight()
    }

    fn scores(&self) -> Vec<u64> {
        self.inner.scores().to_vec()
    }

    fn histogram(&self) -> PyHistogram {
        PyHistogram { inner: self.inner.histogram() }
    }
}

/// Runs steps `n0..=n_max` and returns the histograms at `snapshots`.
#[pyfunction]
fn run(params: PySimParams, n_max: u64, snapshots: Vec<u64>) -> PyResult<Vec<PyHistogram>> {
    let hs = model_s::run(params.inner, n_max, &snapshots).map_err(to_py)?;
    Ok(hs.into_iter().map(|inner| PyHistogram { inner }).collect())
}

#[pyfunction]
fn c_gamma(u: u64, s: u64, a: f64, b: f64, m: f64) -> PyResult<f64> {
    analytic::c_gamma(u, s, a, b, m).map_err(to_py)
}

/// `{s: c(u,s)}` for `u ≤ s ≤ s_max`.
#[pyfunction]
fn limit_distribution(u: u64, s_max: u64, a: f64, b: f64, m: f64) -> PyResult<BTreeMap<u64, f64>> {
    Ok(analytic::c_recurrence(u, s_max, a, b, m).map_err(to_py)?.iter().collect())
}

/// `(K, exponent)` of the tail `c(u,s) ~ K s^-exponent`.
#[pyfunction]
fn tail_coefficient(u: u64, a: f64, b: f64, m: f64) -> PyResult<(f64, f64)> {
    analytic::tail_coefficient(u, a, b, m).map_err(to_py)
}

#[pyfunction]
fn mass_identity_check(u: u64, a: f64, b: f64, m: f64, s_max: u64) -> PyResult<f64> {
    analytic::mass_identity_check(u, a, b, m, s_max).map_err(to_py)
}

/// Exact `E X_n(s)` for `u ≤ s ≤ s_max` at time `n`.
#[pyfunction]
#[pyo3(signature = (params, n, s_max, allow_clamp = false))]
fn expected_histogram(params: PySimParams, n: u64, s_max: u64, allow_clamp: bool) -> PyResult<Vec<f64>> {
    let grid = analytic::expected_histogram_oracle(params.inner, n, s_max, allow_clamp).map_err(to_py)?;
    Ok(grid.row(n).unwrap().to_vec())
}

#[pyclass(name = "GraphParams", from_py_object)]
#[derive(Clone)]
struct PyGraphParams {
    inner: graph::GraphParams,
}

#[pymethods]
impl PyGraphParams {
    #[new]
    #[pyo3(signature = (n, p, r, q, n_max, seed = 0, tracked_m = vec![], snapshots = vec![]))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        p: f64,
        r: f64,
        q: f64,
        n_max: u64,
        seed: u64,
        tracked_m: Vec<usize>,
        snapshots: Vec<u64>,
    ) -> PyResult<Self> {
        let mut inner = graph::GraphParams::new(n, p, r, q, n_max).with_seed(seed).tracking(&tracked_m);
        inner.snapshots = snapshots;
        inner.validate().map_err(to_py)?;
        Ok(PyGraphParams { inner })
    }

    fn __repr__(&self) -> String {
        let g = &self.inner;
        format!(
            "GraphParams(N={}, p={}, r={}, q={}, n_max={}, seed={})",
            g.n, g.p, g.r, g.q, g.n_max, g.seed
        )
    }
}

/// `{"M", "a", "mu", "exponent"}` for clique size `m`.
#[pyfunction]
fn derived_params<'py>(py: Python<'py>, n: usize, m: usize, p: f64, r: f64, q: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = graph::derived_params(n, m, p, r, q).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("M", d.m_size)?;
    out.set_item("a", d.a)?;
    out.set_item("mu", d.mu)?;
    out.set_item("exponent", d.exponent)?;
    Ok(out)
}

#[pyclass(name = "GraphRun", skip_from_py_object)]
struct PyGraphRun {
    inner: graph::GraphRun,
}

#[pymethods]
impl PyGraphRun {
    /// Weight histogram of the tracked clique size `m`.
    fn histogram(&self, m: usize) -> PyResult<PyHistogram> {
        let h = self.inner.registry.histogram(m).map_err(to_py)?;
        Ok(PyHistogram { inner: h })
    }

    #[getter]
    fn v_trace(&self) -> Vec<(u64, u32)> {
        self.inner.v_trace.clone()
    }

    #[getter]
    fn invariant_violations(&self) -> u64 {
        self.inner.invariant_violations
    }

    /// `(mean, stderr)` of new `m`-cliques per step.
    fn newcomer_rate(&self, m: usize) -> PyResult<(f64, f64)> {
        let s = self
            .inner
            .newcomers
            .get(&m)
            .ok_or_else(|| PyValueError::new_err(format!("clique size {m} is not maintained")))?;
        Ok((s.mean(), s.stderr()))
    }

    fn max_weight(&self, m: usize) -> PyResult<u64> {
        Ok(self.inner.registry.cliques(m).map_err(to_py)?.map(|(_, w)| w).max().unwrap_or(0))
    }

    /// Resamples the next interaction from the final state; returns
    /// `(coefficient, stderr)` of `rate / (w/n)` for an `m`-clique of weight `w`.
    fn transition_probe(&self, m: usize, w: u64, samples: u64, seed: u64) -> PyResult<(f64, f64)> {
        let p = graph::weight_transition_probe(&self.inner.registry, m, w, samples, seed).map_err(to_py)?;
        Ok((p.coefficient, p.coefficient_stderr))
    }

    fn histograms_csv(&self) -> String {
        self.inner.histograms_csv()
    }
}

#[pyfunction]
fn run_graph(params: PyGraphParams) -> PyResult<PyGraphRun> {
    Ok(PyGraphRun { inner: graph::run_graph(params.inner).map_err(to_py)? })
}

fn report_dict<'py>(py: Python<'py>, r: &FitReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("exponent_hat", r.exponent_hat)?;
    d.set_item("stderr", r.stderr)?;
    d.set_item("fit_range", r.fit_range.to_vec())?;
    d.set_item(
        "method",
        match r.method {
            FitMethod::CcdfRegression => "ccdf_regression",
            FitMethod::DiscreteMle => "discrete_mle",
        },
    )?;
    d.set_item("n_tail_points", r.n_tail_points)?;
    d.set_item("tail_mass", r.tail_mass)?;
    d.set_item("target_exponent", r.target_exponent)?;
    d.set_item("tolerance", r.tolerance)?;
    d.set_item("pass", r.verdict.map(|v| v.pass))?;
    Ok(d)
}

/// Fits a power-law tail to `{w: count}`. `method` is `"ccdf_regression"`
/// or `"discrete_mle"`.
#[pyfunction]
#[pyo3(signature = (data, method = "discrete_mle", w_min = stats::DEFAULT_W_MIN, w_max = None, target = None, tolerance = 0.3))]
fn fit_tail<'py>(
    py: Python<'py>,
    data: BTreeMap<u64, f64>,
    method: &str,
    w_min: u64,
    w_max: Option<u64>,
    target: Option<f64>,
    tolerance: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let method = match method {
        "ccdf_regression" => FitMethod::CcdfRegression,
        "discrete_mle" => FitMethod::DiscreteMle,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let mut opts = FitOptions::new(method).w_min(w_min);
    if let Some(w) = w_max {
        opts = opts.w_max(w);
    }
    if let Some(t) = target {
        opts = opts.target(t, tolerance);
    }
    let r = stats::fit_tail(&data, opts).map_err(to_py)?;
    report_dict(py, &r)
}

#[pyfunction]
fn replica_seed(master: u64, replica: u64) -> u64 {
    scorelaw::seed::replica_seed(master, replica)
}

/// Runs one acceptance criterion (`"A1"` .. `"A11"`); returns `(pass, detail)`.
#[pyfunction]
#[pyo3(signature = (id, seed = scorelaw::acceptance::ACCEPTANCE_SEED))]
fn acceptance_criterion(py: Python<'_>, id: &str, seed: u64) -> PyResult<(bool, String)> {
    let settings = scorelaw::acceptance::Settings { seed, ..Default::default() };
    let r = py.detach(|| scorelaw::acceptance::run_criterion(id, &settings)).map_err(to_py)?;
    Ok((r.pass, r.detail))
}

#[pymodule]
#[pyo3(name = "scorelaw")]
fn scorelaw_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimParams>()?;
    m.add_class::<PyHistogram>()?;
    m.add_class::<PyScoreTable>()?;
    m.add_class::<PyGraphParams>()?;
    m.add_class::<PyGraphRun>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(c_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(limit_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(tail_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(mass_identity_check, m)?)?;
    m.add_function(wrap_pyfunction!(expected_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(derived_params, m)?)?;
    m.add_function(wrap_pyfunction!(run_graph, m)?)?;
    m.add_function(wrap_pyfunction!(fit_tail, m)?)?;
    m.add_function(wrap_pyfunction!(replica_seed, m)?)?;
    m.add_function(wrap_pyfunction!(acceptance_criterion, m)?)?;
    Ok(())
}
