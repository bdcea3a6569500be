//! Python bindings: model construction, simulation, the mean solvers and the
//! stability analysis.

use cdgarch as core;
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(_) => PyIOError::new_err(e.to_string()),
        core::Error::NonFinite(_) | core::Error::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Centred-or-not compound Poisson jumps plus an optional Brownian part.
#[pyclass(name = "NoiseSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNoiseSpec(core::NoiseSpec);

#[pymethods]
impl PyNoiseSpec {
    #[new]
    #[pyo3(signature = (sigma_l=0.0, lambda_l=0.0, mu_j=0.0, sigma_j=0.0, seed=0))]
    fn new(sigma_l: f64, lambda_l: f64, mu_j: f64, sigma_j: f64, seed: u64) -> PyResult<Self> {
        core::NoiseSpec::new(sigma_l, lambda_l, mu_j, sigma_j, seed).py_err().map(Self)
    }

    #[getter]
    fn kappa2(&self) -> f64 {
        self.0.kappa2()
    }

    #[getter]
    fn kappa4(&self) -> f64 {
        self.0.kappa4()
    }

    /// `(dl, ds)` for `n` increments of length `delta` on the primary stream.
    fn increments(&self, delta: f64, n: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let inc = core::sample_increments(&self.0, delta, 0, n).py_err()?;
        Ok((inc.dl, inc.ds))
    }

    /// `(times, sizes)` of the jumps in `(start, end]`.
    fn jumps(&self, start: f64, end: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let log = core::sample_jump_events(&self.0, (start, end), self.0.seed).py_err()?;
        Ok((log.times, log.sizes))
    }

    fn __repr__(&self) -> String {
        let n = &self.0;
        format!(
            "NoiseSpec(sigma_l={}, lambda_l={}, mu_j={}, sigma_j={}, seed={})",
            n.sigma_l, n.lambda_l, n.mu_j, n.sigma_j, n.seed
        )
    }
}

/// Delay density on `[-support, 0]`.
#[pyclass(name = "DelayKernel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDelayKernel(core::DelayKernel);

#[pymethods]
impl PyDelayKernel {
    /// `w (exp(lambda u) - exp(-lambda support))`.
    #[staticmethod]
    #[pyo3(signature = (w, lam, support))]
    fn exponential(w: f64, lam: f64, support: f64) -> PyResult<Self> {
        core::DelayKernel::exponential(w, lam, support).py_err().map(Self)
    }

    /// Piecewise linear through `values` on a uniform grid of `[-support, 0]`.
    #[staticmethod]
    fn tabulated(support: f64, values: Vec<f64>) -> PyResult<Self> {
        core::DelayKernel::tabulated(support, values).py_err().map(Self)
    }

    #[getter]
    fn support(&self) -> f64 {
        self.0.support()
    }

    /// `(l1, l2, sup)`.
    fn norms(&self) -> (f64, f64, f64) {
        let n = core::kernel_norms(&self.0);
        (n.l1, n.l2, n.sup)
    }

    fn __call__(&self, u: f64) -> f64 {
        self.0.value(u)
    }
}

/// A simulated variance/price path on its reporting grid.
#[pyclass(name = "SamplePath", frozen, skip_from_py_object)]
struct PySamplePath(core::SamplePath);

#[pymethods]
impl PySamplePath {
    /// Grid times of `x`, starting in the initial segment.
    #[getter]
    fn t(&self) -> Vec<f64> {
        (0..self.0.x.len()).map(|i| self.0.time(i)).collect()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.0.x.clone()
    }

    /// Price on `t >= 0`.
    #[getter]
    fn y(&self) -> Vec<f64> {
        self.0.y.clone()
    }

    #[getter]
    fn n_history(&self) -> usize {
        self.0.n_history
    }

    /// `(t, dl, x_pre, x_post)` at every jump.
    #[getter]
    fn events(&self) -> Vec<(f64, f64, f64, f64)> {
        self.0.events.iter().map(|e| (e.t, e.dl, e.x_pre, e.x_post)).collect()
    }

    fn min_x(&self) -> f64 {
        self.0.min_x()
    }

    fn returns(&self, tau: f64) -> PyResult<Vec<f64>> {
        core::euler_returns(&self.0, tau).py_err()
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let f = std::fs::File::create(path).map_err(|e| to_py(e.into()))?;
        self.0.write_csv(f).py_err()
    }

    fn __len__(&self) -> usize {
        self.0.x.len()
    }
}

/// Variance equation parameters.
#[pyclass(name = "DelayModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDelayModel(core::DelayModel);

impl PyDelayModel {
    fn history(&self, level: Option<f64>) -> PyResult<core::HistorySegment> {
        let level = match level {
            Some(v) => v,
            None => core::stationary_mean(&self.0).py_err()?,
        };
        core::HistorySegment::constant(self.0.r(), level).py_err()
    }
}

#[pymethods]
impl PyDelayModel {
    #[new]
    #[pyo3(signature = (eta, c_mu, c_nu, noise, f_mu=None, f_nu=None))]
    fn new(
        eta: f64,
        c_mu: f64,
        c_nu: f64,
        noise: &PyNoiseSpec,
        f_mu: Option<&PyDelayKernel>,
        f_nu: Option<&PyDelayKernel>,
    ) -> PyResult<Self> {
        let (f_mu, f_nu) = (f_mu.map(|k| k.0.clone()), f_nu.map(|k| k.0.clone()));
        core::DelayModel::new(eta, c_mu, c_nu, f_mu, f_nu, noise.0).py_err().map(Self)
    }

    /// Longest delay `max(p, q)`.
    #[getter]
    fn r(&self) -> f64 {
        self.0.r()
    }

    fn stationary_mean(&self) -> PyResult<f64> {
        core::stationary_mean(&self.0).py_err()
    }

    fn positivity_floor(&self) -> PyResult<f64> {
        core::positivity_floor(&self.0).py_err()
    }

    /// `Delta(z) = z + c0 - ∫ e^{zu} f(u) du`.
    fn characteristic(&self, z: Complex64) -> Complex64 {
        core::characteristic_delta(&self.0, z)
    }

    /// Every condition and bound as a dict, with `E[X0]` and `E[X0^2]` for
    /// the moment bounds.
    #[pyo3(signature = (ex0=0.0, ex0_sq=0.0, grid_density=400))]
    fn analyze<'py>(
        &self,
        py: Python<'py>,
        ex0: f64,
        ex0_sq: f64,
        grid_density: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let report = core::stability_report(&self.0, ex0, ex0_sq, grid_density).py_err()?;
        let d = PyDict::new(py);
        for (k, v) in report.entries() {
            match v.parse::<f64>() {
                Ok(x) => d.set_item(k, x)?,
                Err(_) => d.set_item(k, v)?,
            }
        }
        Ok(d)
    }

    /// Mean path `(t, m)` from a constant history (default `M`).
    #[pyo3(signature = (t_end, step=1e-3, solver="dde", history=None))]
    fn mean(&self, t_end: f64, step: f64, solver: &str, history: Option<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let phi = self.history(history)?;
        let path = match solver {
            "dde" => core::solve_mean_fde(&self.0, &phi, t_end, step),
            "renewal" => core::solve_mean_renewal(&self.0, &phi, t_end, step),
            other => {
                return Err(PyValueError::new_err(format!("unknown solver {other:?}, expected 'dde' or 'renewal'")))
            }
        }
        .py_err()?;
        Ok(((0..path.m.len()).map(|i| path.time(i)).collect(), path.m))
    }

    /// Event-driven ensemble on `(0, horizon]`.
    #[pyo3(signature = (horizon, n_paths=1, seed=0, history=None, ode_step=1e-3, report_dt=0.01))]
    fn simulate_events(
        &self,
        horizon: f64,
        n_paths: usize,
        seed: u64,
        history: Option<f64>,
        ode_step: f64,
        report_dt: f64,
    ) -> PyResult<Vec<PySamplePath>> {
        let phi = self.history(history)?;
        let opts = core::EventOptions::new(ode_step, report_dt).py_err()?;
        let paths = core::event_ensemble(&self.0, &phi, horizon, n_paths, seed, &opts).py_err()?;
        Ok(paths.into_iter().map(PySamplePath).collect())
    }

    /// Euler ensemble on the grid `k delta`.
    #[pyo3(signature = (delta, horizon, n_paths=1, seed=0, history=None))]
    fn simulate_euler(
        &self,
        delta: f64,
        horizon: f64,
        n_paths: usize,
        seed: u64,
        history: Option<f64>,
    ) -> PyResult<Vec<PySamplePath>> {
        let phi = self.history(history)?;
        let paths = core::euler_ensemble(&self.0, &phi, delta, horizon, n_paths, seed).py_err()?;
        Ok(paths.into_iter().map(PySamplePath).collect())
    }

    /// `kappa2 M (1 - u)_+`.
    fn return_autocov(&self, u: f64) -> PyResult<f64> {
        core::theoretical_return_autocov(&self.0, u).py_err()
    }
}

/// Ensemble estimates of the return autocovariance: `(u, cov, std_error)` per lag.
#[pyfunction]
fn return_autocov(paths: Vec<PyRef<'_, PySamplePath>>, tau: f64, lags: Vec<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
    let owned: Vec<core::SamplePath> = paths.iter().map(|p| p.0.clone()).collect();
    let rows = core::return_autocov_ensemble(&owned, tau, &lags).py_err()?;
    Ok(rows.into_iter().map(|r| (r.u, r.cov, r.std_error)).collect())
}

/// Model and config digest from a TOML run configuration.
#[pyfunction]
fn load_config(path: &str) -> PyResult<(PyDelayModel, String)> {
    let cfg = core::Config::from_path(std::path::Path::new(path)).py_err()?;
    Ok((PyDelayModel(cfg.model().py_err()?), cfg.digest()))
}

#[pymodule(name = "cdgarch")]
fn cdgarch_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNoiseSpec>()?;
    m.add_class::<PyDelayKernel>()?;
    m.add_class::<PyDelayModel>()?;
    m.add_class::<PySamplePath>()?;
    m.add_function(wrap_pyfunction!(return_autocov, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    Ok(())
}
