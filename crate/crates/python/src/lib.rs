//! Python bindings: `import degenbranch`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use degenbranch::branching_sim::{self, ModelParams};
use degenbranch::error::Error;
use degenbranch::limit_constants::{self, ConstantResult};
use degenbranch::rng::derive_stream;
use degenbranch::stable_motion;
use degenbranch::{cli, fluctuation, stats, test_function, verify_harness};

pub fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_)
        | Error::Config { .. }
        | Error::UnsupportedRegime { .. }
        | Error::Divergence(_)
        | Error::Json(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn indices(alphas: Vec<f64>) -> PyResult<stable_motion::StableIndexVector> {
    stable_motion::StableIndexVector::new(alphas).map_err(to_py_err)
}

#[pyclass(name = "StableIndexVector", frozen)]
#[derive(Clone)]
pub struct PyStableIndexVector {
    inner: stable_motion::StableIndexVector,
}

#[pymethods]
impl PyStableIndexVector {
    #[new]
    fn new(alphas: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: indices(alphas)? })
    }

    #[getter]
    fn alphas(&self) -> Vec<f64> {
        self.inner.alphas().to_vec()
    }

    #[getter]
    fn bar_alpha(&self) -> f64 {
        self.inner.bar_alpha()
    }

    #[getter]
    fn regime(&self) -> String {
        format!("{:?}", self.inner.regime())
    }

    fn __repr__(&self) -> String {
        format!("StableIndexVector({:?}, regime={:?})", self.inner.alphas(), self.inner.regime())
    }
}

#[pyclass(name = "GaussianTestFunction", frozen)]
#[derive(Clone)]
pub struct PyGaussianTestFunction {
    inner: test_function::GaussianTestFunction,
}

#[pymethods]
impl PyGaussianTestFunction {
    #[new]
    #[pyo3(signature = (centers, widths, amplitude = 1.0))]
    fn new(centers: Vec<f64>, widths: Vec<f64>, amplitude: f64) -> PyResult<Self> {
        let inner = test_function::GaussianTestFunction::new(centers, widths, amplitude).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn standard(dim: usize) -> Self {
        Self {
            inner: test_function::GaussianTestFunction::standard(dim),
        }
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_dim(x.len())?;
        Ok(self.inner.value(&x))
    }

    fn integral(&self) -> f64 {
        self.inner.integral()
    }

    fn fourier(&self, z: Vec<f64>) -> PyResult<(f64, f64)> {
        self.check_dim(z.len())?;
        let c = self.inner.fourier(&z);
        Ok((c.re, c.im))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
}

impl PyGaussianTestFunction {
    fn check_dim(&self, len: usize) -> PyResult<()> {
        if len == self.inner.dim() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("expected {} coordinates, got {len}", self.inner.dim())))
        }
    }
}

fn constant_dict<'py>(py: Python<'py>, c: &ConstantResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", c.value)?;
    d.set_item("method", format!("{:?}", c.method))?;
    d.set_item("est_abs_error", c.est_abs_error)?;
    d.set_item("regime", format!("{:?}", c.regime))?;
    Ok(d)
}

/// `count` increments of the symmetric α-stable motion over time `t`.
#[pyfunction]
#[pyo3(signature = (alpha, t, count, seed = 0))]
fn sample_stable_increments(alpha: f64, t: f64, count: usize, seed: u64) -> PyResult<Vec<f64>> {
    let mut rng = derive_stream(seed, 0, "python");
    (0..count)
        .map(|_| stable_motion::sample_stable_increment(alpha, t, &mut rng).map_err(to_py_err))
        .collect()
}

#[pyfunction]
fn motion_cf(z: Vec<f64>, t: f64, alphas: Vec<f64>) -> PyResult<f64> {
    stable_motion::motion_cf(&z, t, &indices(alphas)?).map_err(to_py_err)
}

#[pyfunction]
fn semigroup_apply(phi: &PyGaussianTestFunction, t: f64, x: Vec<f64>, alphas: Vec<f64>) -> PyResult<f64> {
    stable_motion::semigroup_apply(&phi.inner, t, &x, &indices(alphas)?).map_err(to_py_err)
}

#[pyfunction]
fn expected_population(s: f64, gamma: f64, delta: f64) -> PyResult<f64> {
    branching_sim::expected_population(s, gamma, delta).map_err(to_py_err)
}

#[pyfunction]
fn integrated_expected_population(horizon: f64, gamma: f64, delta: f64) -> PyResult<f64> {
    branching_sim::integrated_expected_population(horizon, gamma, delta).map_err(to_py_err)
}

#[pyfunction]
fn scaling_fn(gamma: f64, theta: f64, kappa: f64, n: f64, alphas: Vec<f64>) -> PyResult<f64> {
    let params = ModelParams::new(gamma, theta, kappa, n).map_err(to_py_err)?;
    fluctuation::scaling_fn(&params, &indices(alphas)?).map_err(to_py_err)
}

#[pyfunction]
fn anisotropic_cubic_integral(alphas: Vec<f64>) -> PyResult<f64> {
    limit_constants::anisotropic_cubic_integral(&indices(alphas)?).map_err(to_py_err)
}

#[pyfunction]
fn c1<'py>(py: Python<'py>, alphas: Vec<f64>, gamma: f64, theta: f64, kappa: f64) -> PyResult<Bound<'py, PyDict>> {
    let c = limit_constants::c1(&indices(alphas)?, gamma, theta, kappa).map_err(to_py_err)?;
    constant_dict(py, &c)
}

#[pyfunction]
fn c2<'py>(py: Python<'py>, alphas: Vec<f64>, gamma: f64, theta: f64) -> PyResult<Bound<'py, PyDict>> {
    let c = limit_constants::c2(&indices(alphas)?, gamma, theta).map_err(to_py_err)?;
    constant_dict(py, &c)
}

#[pyfunction]
fn large_dim_covariance(
    phi1: &PyGaussianTestFunction,
    phi2: &PyGaussianTestFunction,
    alphas: Vec<f64>,
    gamma: f64,
    theta: f64,
) -> PyResult<f64> {
    limit_constants::large_dim_covariance(&phi1.inner, &phi2.inner, &indices(alphas)?, gamma, theta).map_err(to_py_err)
}

/// `(variance, (lower, upper))` with a 95% percentile bootstrap interval.
#[pyfunction]
#[pyo3(signature = (samples, seed = 0))]
fn estimate_variance(samples: Vec<f64>, seed: u64) -> PyResult<(f64, (f64, f64))> {
    let v = stats::estimate_variance(&samples, &mut derive_stream(seed, 0, "bootstrap")).map_err(to_py_err)?;
    Ok((v.estimate, (v.ci.lower, v.ci.upper)))
}

/// `(slope, stderr)`; `stderr` is `None` for two scales.
#[pyfunction]
fn scaling_exponent(ns: Vec<f64>, variances: Vec<f64>) -> PyResult<(f64, Option<f64>)> {
    let f = stats::scaling_exponent(&ns, &variances).map_err(to_py_err)?;
    Ok((f.slope, f.stderr))
}

/// `(ks_statistic, p_value, skewness, excess_kurtosis)`.
#[pyfunction]
fn normality_test(samples: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let s = stats::normality_test(&samples).map_err(to_py_err)?;
    Ok((s.ks_statistic, s.p_value, s.skewness, s.excess_kurtosis))
}

/// Runs an experiment described by a JSON config and returns the summary
/// report as a JSON string.
#[pyfunction]
#[pyo3(signature = (config_json, workers = 1))]
fn run_experiment(py: Python<'_>, config_json: &str, workers: usize) -> PyResult<String> {
    let config = cli::parse_config(config_json).map_err(to_py_err)?;
    let outcome = py
        .allow_threads(|| verify_harness::run_experiment(&config, workers))
        .map_err(to_py_err)?;
    serde_json::to_string(&outcome.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "degenbranch")]
pub fn degenbranch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyStableIndexVector>()?;
    m.add_class::<PyGaussianTestFunction>()?;
    m.add_function(wrap_pyfunction!(sample_stable_increments, m)?)?;
    m.add_function(wrap_pyfunction!(motion_cf, m)?)?;
    m.add_function(wrap_pyfunction!(semigroup_apply, m)?)?;
    m.add_function(wrap_pyfunction!(expected_population, m)?)?;
    m.add_function(wrap_pyfunction!(integrated_expected_population, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_fn, m)?)?;
    m.add_function(wrap_pyfunction!(anisotropic_cubic_integral, m)?)?;
    m.add_function(wrap_pyfunction!(c1, m)?)?;
    m.add_function(wrap_pyfunction!(c2, m)?)?;
    m.add_function(wrap_pyfunction!(large_dim_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_variance, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(normality_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
