use pyo3::prelude::*;
use pyo3::types::PyModule;

fn with_module<F: FnOnce(&Bound<'_, PyModule>) -> PyResult<()>>(f: F) {
    pyo3::prepare_freethreaded_python();
    Python::with_gil(|py| {
        let m = PyModule::new(py, "degenbranch").unwrap();
        degenbranch_py::degenbranch_py(&m).unwrap();
        f(&m).unwrap();
    });
}

#[test]
fn constants_through_python() {
    with_module(|m| {
        let c1 = m.getattr("c1")?.call1((vec![0.5], 1.0, 1.0, 0.5))?;
        let v: f64 = c1.get_item("value")?.extract()?;
        assert!((v - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let method: String = c1.get_item("method")?.extract()?;
        assert_eq!(method, "ClosedForm");
        let cubic: f64 = m.getattr("anisotropic_cubic_integral")?.call1((vec![1.0, 1.0],))?.extract()?;
        assert!((cubic - 2.0).abs() < 1e-12);
        Ok(())
    });
}

#[test]
fn domain_errors_become_value_errors() {
    with_module(|m| {
        let py = m.py();
        let err = m.getattr("c1")?.call1((vec![2.0 / 3.0], 1.0, 1.0, 0.5)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let err = m.getattr("StableIndexVector")?.call1((vec![2.5],)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let err = m.getattr("run_experiment")?.call1((r#"{"kappa": 1.5}"#,)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        Ok(())
    });
}

#[test]
fn test_function_and_sampler() {
    with_module(|m| {
        let phi = m.getattr("GaussianTestFunction")?.call1((vec![0.5], vec![2.0], 3.0))?;
        let at_center: f64 = phi.call_method1("value", (vec![0.5],))?.extract()?;
        assert_eq!(at_center, 3.0);
        let (re, im): (f64, f64) = phi.call_method1("fourier", (vec![0.0],))?.extract()?;
        let integral: f64 = phi.call_method0("integral")?.extract()?;
        assert!((re - integral).abs() < 1e-12 && im == 0.0);
        let a: Vec<f64> = m.getattr("sample_stable_increments")?.call1((1.5, 1.0, 10, 3))?.extract()?;
        let b: Vec<f64> = m.getattr("sample_stable_increments")?.call1((1.5, 1.0, 10, 3))?.extract()?;
        assert_eq!(a, b);
        Ok(())
    });
}
