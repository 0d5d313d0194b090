//! Python bindings. Structured results come back as plain dicts and lists.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use qbsde_core::coupling::{coupling_sweep as sweep, CouplingConfig, LocalCorrelation};
use qbsde_core::driver::{truncate, validate_driver as validate, SamplingBox};
use qbsde_core::forward::{kobylanski_pipeline, PipelineConfig, PipelineReport};
use qbsde_core::martingale::{f_martingale_test, unit_drift_candidates, AutoFamily, FamilyKind, TestFamily};
use qbsde_core::paths::{simulate_bm, TimeGrid};
use qbsde_core::pde::{solve_semilinear, ExtractOptions, SpaceGrid, TerminalCondition, ValueGrid};
use qbsde_core::subharmonic::{
    construct_subharmonic as construct, eval_lf, exp_test_function, is_subharmonic as check_phi, majorize_cone_quadratic,
    AnsatzFunction, BasePoint, ConeQuadratic, ConstructOptions, SubharmonicOptions, TestFunction,
};
use qbsde_core::{registry, DriverSpec, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Dimension(_) | Error::UnknownName { .. } | Error::OutsideDomain { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn family_kind(name: &str) -> PyResult<FamilyKind> {
    match name {
        "ansatz" => Ok(FamilyKind::Ansatz),
        "x_free" => Ok(FamilyKind::XFree),
        other => Err(PyValueError::new_err(format!("unknown family `{other}`, expected `ansatz` or `x_free`"))),
    }
}

/// A registry driver such as `quadratic:gamma=1`.
#[pyclass(name = "Driver", module = "qbsde", frozen)]
struct PyDriver {
    inner: DriverSpec,
}

#[pymethods]
impl PyDriver {
    #[new]
    #[pyo3(signature = (spec, n = 1, d = 1, horizon = 1.0))]
    fn new(spec: &str, n: usize, d: usize, horizon: f64) -> PyResult<Self> {
        registry::driver(spec, n, d, horizon).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn growth_constant(&self) -> f64 {
        self.inner.growth_constant()
    }

    /// `f(t, y, z)` with `z` flattened row-major.
    fn __call__(&self, t: f64, y: Vec<f64>, z: Vec<f64>) -> PyResult<Vec<f64>> {
        if y.len() != self.inner.n() || z.len() != self.inner.n() * self.inner.d() {
            return Err(PyValueError::new_err("y needs length n and z length n * d"));
        }
        Ok(self.inner.eval_vec(t, &y, &z))
    }

    fn truncate(&self, k: f64) -> PyResult<Self> {
        truncate(&self.inner, k).map(|inner| Self { inner }).map_err(py_err)
    }

    #[pyo3(signature = (budget = 2000, seed = 0, y_bound = 3.0, z_bound = 5.0))]
    fn validate(&self, py: Python<'_>, budget: usize, seed: u64, y_bound: f64, z_bound: f64) -> PyResult<Py<PyAny>> {
        let sbox = SamplingBox::symmetric(self.inner.horizon(), y_bound, z_bound).map_err(py_err)?;
        let report = validate(&self.inner, &sbox, budget, seed).map_err(py_err)?;
        to_py(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("Driver('{}', n={}, d={})", self.inner.label(), self.inner.n(), self.inner.d())
    }
}

/// A registry terminal condition such as `tanh` or `clip:lo=-1,hi=1`.
#[pyclass(name = "Terminal", module = "qbsde", frozen)]
struct PyTerminal {
    inner: TerminalCondition,
}

#[pymethods]
impl PyTerminal {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        registry::terminal(spec).map(|inner| Self { inner }).map_err(py_err)
    }

    fn __call__(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    #[getter]
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    fn __repr__(&self) -> String {
        format!("Terminal('{}')", self.inner.label())
    }
}

/// Solution `u` and `u_x` of the semilinear PDE on a space-time grid.
#[pyclass(name = "ValueGrid", module = "qbsde", frozen)]
struct PyValueGrid {
    inner: ValueGrid,
}

#[pymethods]
impl PyValueGrid {
    #[getter]
    fn y0(&self) -> f64 {
        self.inner.y0()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.grid().steps()
    }

    #[getter]
    fn nodes(&self) -> usize {
        self.inner.space().nodes()
    }

    fn times(&self) -> Vec<f64> {
        (0..=self.inner.grid().steps()).map(|i| self.inner.grid().time(i)).collect()
    }

    fn xs(&self) -> Vec<f64> {
        (0..self.inner.space().nodes()).map(|j| self.inner.space().x(j)).collect()
    }

    /// `u` at time index `i` across every space node.
    fn u(&self, i: usize) -> PyResult<Vec<f64>> {
        self.check_index(i)?;
        Ok(self.inner.u_row(i).to_vec())
    }

    fn ux(&self, i: usize) -> PyResult<Vec<f64>> {
        self.check_index(i)?;
        Ok(self.inner.ux_row(i).to_vec())
    }

    fn max_abs_u(&self) -> f64 {
        self.inner.max_abs_u()
    }
}

impl PyValueGrid {
    fn check_index(&self, i: usize) -> PyResult<()> {
        if i > self.inner.grid().steps() {
            return Err(PyValueError::new_err(format!("time index {i} exceeds {} steps", self.inner.grid().steps())));
        }
        Ok(())
    }
}

#[pyfunction]
#[pyo3(signature = (driver, terminal, steps = 200, half_width = 8.0, dx = 0.02))]
fn solve(driver: &PyDriver, terminal: &PyTerminal, steps: usize, half_width: f64, dx: f64) -> PyResult<PyValueGrid> {
    let grid = TimeGrid::new(driver.inner.horizon(), steps).map_err(py_err)?;
    let space = SpaceGrid::new(half_width, dx).map_err(py_err)?;
    let inner = solve_semilinear(&driver.inner, &terminal.inner, space, grid).map_err(py_err)?;
    Ok(PyValueGrid { inner })
}

/// Result of the truncation schedule; keeps the largest-`k` solution for
/// follow-up checks.
#[pyclass(name = "Pipeline", module = "qbsde", frozen)]
struct PyPipeline {
    inner: PipelineReport,
}

#[pymethods]
impl PyPipeline {
    #[getter]
    fn y0(&self) -> f64 {
        self.inner.y0()
    }

    fn report(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    /// Runs the f-martingale test on the limit solution with an automatic family.
    #[pyo3(signature = (driver, points = 20, family = "ansatz", seed = 0))]
    fn martingale_test(&self, py: Python<'_>, driver: &PyDriver, points: usize, family: &str, seed: u64) -> PyResult<Py<PyAny>> {
        let family = auto_family(points, family, seed)?;
        let report = f_martingale_test(&driver.inner, &self.inner.limit, &family).map_err(py_err)?;
        to_py(py, &report)
    }
}

fn auto_family(points: usize, kind: &str, seed: u64) -> PyResult<TestFamily> {
    Ok(TestFamily::Auto(AutoFamily {
        points,
        kind: family_kind(kind)?,
        seed,
        ..AutoFamily::default()
    }))
}

#[pyfunction]
#[pyo3(signature = (
    driver, terminal, steps = 200, half_width = 8.0, dx = 0.02, paths = 10000, seed = 0,
    schedule = None, early_stop = Some(1e-3)
))]
#[allow(clippy::too_many_arguments)]
fn kobylanski(
    driver: &PyDriver,
    terminal: &PyTerminal,
    steps: usize,
    half_width: f64,
    dx: f64,
    paths: usize,
    seed: u64,
    schedule: Option<Vec<f64>>,
    early_stop: Option<f64>,
) -> PyResult<PyPipeline> {
    let grid = TimeGrid::new(driver.inner.horizon(), steps).map_err(py_err)?;
    let mut config = PipelineConfig::new(grid, half_width, dx, paths, seed);
    if let Some(s) = schedule {
        config.schedule = s;
    }
    config.early_stop = early_stop;
    let inner = kobylanski_pipeline(&driver.inner, &terminal.inner, &config).map_err(py_err)?;
    Ok(PyPipeline { inner })
}

/// Tests `Y = t + B` (`candidate = "unit_drift"`) or `Y = t + int sign(B) dB`
/// (`"sign_flip"`) against `driver`, which should be `zlinear:c=-1`.
#[pyfunction]
#[pyo3(signature = (driver, candidate = "unit_drift", steps = 200, paths = 100000, seed = 0, points = 5, family = "ansatz"))]
#[allow(clippy::too_many_arguments)]
fn unit_drift_test(
    py: Python<'_>,
    driver: &PyDriver,
    candidate: &str,
    steps: usize,
    paths: usize,
    seed: u64,
    points: usize,
    family: &str,
) -> PyResult<Py<PyAny>> {
    let grid = TimeGrid::new(driver.inner.horizon(), steps).map_err(py_err)?;
    let ens = Arc::new(simulate_bm(grid, paths, 1, seed).map_err(py_err)?);
    let (solution, impostor) = unit_drift_candidates(&ens).map_err(py_err)?;
    let process = match candidate {
        "unit_drift" => solution,
        "sign_flip" => impostor,
        other => return Err(PyValueError::new_err(format!("unknown candidate `{other}`"))),
    };
    let report = f_martingale_test(&driver.inner, &process, &auto_family(points, family, seed)?).map_err(py_err)?;
    to_py(py, &report)
}

/// An Ansatz test function certified on a ball around its base point.
#[pyclass(name = "AnsatzFunction", module = "qbsde", frozen)]
struct PyAnsatz {
    inner: AnsatzFunction,
}

#[pymethods]
impl PyAnsatz {
    #[getter]
    fn r_dom(&self) -> f64 {
        self.inner.r_dom()
    }

    fn __call__(&self, t: f64, x: Vec<f64>, y: Vec<f64>) -> f64 {
        self.inner.value(t, &x, &y)
    }

    /// `(phi_y, phi_xy)` at `(t, x, y)`.
    fn gradients(&self, t: f64, x: Vec<f64>, y: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let p = self.inner.partials(t, &x, &y);
        (p.y, p.xy)
    }

    fn lf(&self, driver: &PyDriver, t: f64, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> PyResult<f64> {
        eval_lf(&driver.inner, &self.inner, t, &x, &y, &z).map_err(py_err)
    }

    fn record(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.record())
    }

    #[pyo3(signature = (driver, budget = 64, seed = 0))]
    fn is_subharmonic(&self, py: Python<'_>, driver: &PyDriver, budget: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let opts = SubharmonicOptions {
            budget,
            seed,
            horizon: driver.inner.horizon(),
            ..SubharmonicOptions::default()
        };
        to_py(py, &check_phi(&driver.inner, &self.inner, &opts))
    }

    fn __repr__(&self) -> String {
        self.inner.label()
    }
}

#[pyfunction]
#[pyo3(signature = (driver, t, x, y, z, i0 = 0, sign = 1.0, eps = 0.5, r_y = 0.25, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn construct_subharmonic(
    driver: &PyDriver,
    t: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    i0: usize,
    sign: f64,
    eps: f64,
    r_y: f64,
    seed: u64,
) -> PyResult<PyAnsatz> {
    let mut opts = ConstructOptions::default();
    opts.check.seed = seed;
    opts.check.horizon = driver.inner.horizon();
    let base = BasePoint { t, x, y, z };
    construct(&driver.inner, &base, i0, sign, eps, r_y, &opts)
        .map(|inner| PyAnsatz { inner })
        .map_err(py_err)
}

/// Checks `exp(sigma C1 y) + C2 |x|^2` on `|y| <= ybound`.
#[pyfunction]
#[pyo3(signature = (driver, ybound, sign = 1.0, budget = 64, seed = 0))]
fn check_exp_test_function(py: Python<'_>, driver: &PyDriver, ybound: f64, sign: f64, budget: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let phi = exp_test_function(driver.inner.growth_constant(), ybound, sign, driver.inner.d()).map_err(py_err)?;
    let opts = SubharmonicOptions {
        budget,
        seed,
        horizon: driver.inner.horizon(),
        ..SubharmonicOptions::default()
    };
    to_py(py, &check_phi(&driver.inner, &phi, &opts))
}

/// Quadratic majorant of `a0 + b0 r + c0 r^2` within `eps` at `r = 0`.
#[pyfunction]
fn majorize(py: Python<'_>, a0: f64, b0: f64, c0: f64, eps: f64) -> PyResult<Py<PyAny>> {
    let l = ConeQuadratic::new(a0, b0, c0, vec![0.0]).map_err(py_err)?;
    to_py(py, &majorize_cone_quadratic(&l, eps).map_err(py_err)?)
}

/// One row per rule: constant correlations `rs`, then threshold rules `thresholds`.
#[pyfunction]
#[pyo3(signature = (
    driver, terminal, rs = vec![0.0, 0.5, 0.9, 0.99, 1.0], thresholds = vec![], steps = 200,
    half_width = 8.0, dx = 0.02, paths = 10000, seed = 0, tail_eps = 0.1
))]
#[allow(clippy::too_many_arguments)]
fn coupling_sweep(
    py: Python<'_>,
    driver: &PyDriver,
    terminal: &PyTerminal,
    rs: Vec<f64>,
    thresholds: Vec<f64>,
    steps: usize,
    half_width: f64,
    dx: f64,
    paths: usize,
    seed: u64,
    tail_eps: f64,
) -> PyResult<Py<PyAny>> {
    let rules: Vec<LocalCorrelation> = rs
        .into_iter()
        .map(|r| LocalCorrelation::Constant { r })
        .chain(thresholds.into_iter().map(|eps| LocalCorrelation::Threshold { eps }))
        .collect();
    let config = CouplingConfig {
        grid: TimeGrid::new(driver.inner.horizon(), steps).map_err(py_err)?,
        half_width,
        dx,
        paths,
        seed,
        extract: ExtractOptions::default(),
    };
    let rows = sweep(&driver.inner, &terminal.inner, &rules, &config, tail_eps).map_err(py_err)?;
    to_py(py, &rows)
}

#[pymodule]
fn qbsde(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDriver>()?;
    m.add_class::<PyTerminal>()?;
    m.add_class::<PyValueGrid>()?;
    m.add_class::<PyPipeline>()?;
    m.add_class::<PyAnsatz>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(kobylanski, m)?)?;
    m.add_function(wrap_pyfunction!(unit_drift_test, m)?)?;
    m.add_function(wrap_pyfunction!(construct_subharmonic, m)?)?;
    m.add_function(wrap_pyfunction!(check_exp_test_function, m)?)?;
    m.add_function(wrap_pyfunction!(majorize, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_sweep, m)?)?;
    Ok(())
}
