//! Python bindings: grids, replicas, spectra and the scalar helpers.

use std::collections::HashMap;

use lqg_core::chaos::{bessel_j0, unfold_gaps, wigner_surmise_cdf};
use lqg_core::domain::green_disc;
use lqg_core::field::CouplingParams;
use lqg_core::heat::{heat_trace, kpz_solve};
use lqg_core::pipeline::Lab;
use lqg_core::spectral::{counting_function, weyl_fit};
use lqg_core::{DomainSpec, LiouvilleSpectrum, LqgError};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: LqgError) -> PyErr {
    match e {
        LqgError::Config(_) | LqgError::Domain(_) | LqgError::Format(_) => PyValueError::new_err(e.to_string()),
        LqgError::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_domain(kind: &str) -> PyResult<DomainSpec> {
    match kind {
        "disc" => Ok(DomainSpec::disc()),
        "square" => Ok(DomainSpec::square(64)),
        other => Err(PyValueError::new_err(format!("unknown domain {other:?}; expected 'disc' or 'square'"))),
    }
}

/// Grid, Green kernel and field covariance at one resolution.
#[pyclass(name = "Lab", frozen)]
struct PyLab {
    inner: Lab,
}

#[pymethods]
impl PyLab {
    #[new]
    #[pyo3(signature = (kind = "disc", n = 32))]
    fn new(py: Python<'_>, kind: &str, n: usize) -> PyResult<Self> {
        let spec = parse_domain(kind)?;
        let inner = py.detach(|| Lab::new(spec, n)).map_err(to_py)?;
        Ok(PyLab { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.grid.len()
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        self.inner.grid.points.iter().map(|p| (p[0], p[1])).collect()
    }

    #[getter]
    fn mesh(&self) -> f64 {
        self.inner.grid.mesh
    }

    /// Samples a field with `seed` and diagonalises the Liouville operator.
    #[pyo3(signature = (gamma, seed, vectors = false))]
    fn replica(&self, py: Python<'_>, gamma: f64, seed: u64, vectors: bool) -> PyResult<PySpectrum> {
        let params = CouplingParams::new(gamma).map_err(to_py)?;
        let rep = py.detach(|| self.inner.replica(params, seed, vectors)).map_err(to_py)?;
        Ok(PySpectrum { inner: rep.spectrum, gamma, field: rep.field })
    }
}

#[pyclass(name = "Spectrum", frozen)]
struct PySpectrum {
    inner: LiouvilleSpectrum,
    gamma: f64,
    field: Vec<f64>,
}

#[pymethods]
impl PySpectrum {
    #[new]
    #[pyo3(signature = (lambdas, total_mass, gamma = 0.0))]
    fn new(lambdas: Vec<f64>, total_mass: f64, gamma: f64) -> Self {
        PySpectrum { inner: LiouvilleSpectrum::from_lambdas(lambdas, total_mass), gamma, field: Vec::new() }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.lambdas.clone()
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.inner.total_mass
    }

    #[getter]
    fn field(&self) -> Vec<f64> {
        self.field.clone()
    }

    /// `f_n` at the grid points, 1-based.
    fn eigfunc(&self, n: usize) -> PyResult<Vec<f64>> {
        self.inner.eigfunc(n).map_err(to_py)
    }

    fn counting(&self, lam: f64) -> usize {
        counting_function(&self.inner, lam)
    }

    #[pyo3(signature = (lo = 0.02, hi = 0.2))]
    fn weyl_fit(&self, lo: f64, hi: f64) -> PyResult<HashMap<String, f64>> {
        let params = CouplingParams::new(self.gamma).map_err(to_py)?;
        let fit = weyl_fit(&self.inner, &params, (lo, hi)).map_err(to_py)?;
        Ok(HashMap::from([
            ("c_hat".to_string(), fit.slope),
            ("target".to_string(), fit.target),
            ("discrepancy".to_string(), fit.discrepancy),
            ("polya_fraction".to_string(), fit.polya_fraction),
        ]))
    }

    fn heat_trace(&self, times: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(heat_trace(&self.inner, &times).map_err(to_py)?.values)
    }

    #[pyo3(signature = (lo = 0.02, hi = 0.2))]
    fn spacing(&self, lo: f64, hi: f64) -> PyResult<HashMap<String, f64>> {
        let params = CouplingParams::new(self.gamma).map_err(to_py)?;
        let st = unfold_gaps(&self.inner, &params, (lo, hi)).map_err(to_py)?;
        Ok(HashMap::from([
            ("ks_goe".to_string(), st.ks_goe),
            ("ks_poisson".to_string(), st.ks_poisson),
            ("mean_gap".to_string(), st.mean_gap),
        ]))
    }
}

/// KPZ exponent `Δ` for Euclidean exponent `x`.
#[pyfunction(name = "kpz_solve")]
fn py_kpz_solve(x: f64, gamma: f64) -> PyResult<f64> {
    Ok(kpz_solve(x, gamma).map_err(to_py)?.delta)
}

#[pyfunction(name = "weyl_constant")]
fn py_weyl_constant(gamma: f64) -> PyResult<f64> {
    CouplingParams::new(gamma).map(|p| p.weyl_const).map_err(to_py)
}

#[pyfunction(name = "green_disc")]
fn py_green_disc(x: (f64, f64), y: (f64, f64)) -> PyResult<f64> {
    green_disc([x.0, x.1], [y.0, y.1]).map_err(to_py)
}

#[pyfunction(name = "bessel_j0")]
fn py_bessel_j0(r: f64) -> PyResult<f64> {
    if r < 0.0 {
        return Err(PyValueError::new_err("bessel_j0 requires r >= 0"));
    }
    Ok(bessel_j0(r))
}

#[pyfunction(name = "wigner_surmise_cdf")]
fn py_wigner_surmise_cdf(s: f64) -> PyResult<f64> {
    wigner_surmise_cdf(s).map_err(to_py)
}

#[pymodule]
fn lqg_spectrum(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", lqg_core::ARTIFACT_VERSION)?;
    m.add_class::<PyLab>()?;
    m.add_class::<PySpectrum>()?;
    m.add_function(wrap_pyfunction!(py_kpz_solve, m)?)?;
    m.add_function(wrap_pyfunction!(py_weyl_constant, m)?)?;
    m.add_function(wrap_pyfunction!(py_green_disc, m)?)?;
    m.add_function(wrap_pyfunction!(py_bessel_j0, m)?)?;
    m.add_function(wrap_pyfunction!(py_wigner_surmise_cdf, m)?)?;
    Ok(())
}
