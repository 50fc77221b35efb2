//! Python module `nested_spectra`: samplers, estimators, limiting-law
//! predictions and the experiment runner.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use nested_spectra::estimators::{self, Init};
use nested_spectra::experiments::{self, Experiment, ExperimentConfig, Overrides};
use nested_spectra::model::{self, GeneralParams, MultiViewParams, Snr};
use nested_spectra::theory::{self, ShapeRatios, SpikePrediction, C64};
use nested_spectra::{Error, Mode, Tensor3};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Argument(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyArithmeticError::new_err(e.to_string()),
    }
}

fn mode(m: usize) -> PyResult<Mode> {
    Mode::try_from(m).map_err(py_err)
}

fn ratios(c: (f64, f64, f64)) -> PyResult<ShapeRatios> {
    ShapeRatios::new(c.0, c.1, c.2).map_err(py_err)
}

/// Dense order-3 tensor with entry `(i, j, k)` at `(i·n2 + j)·n3 + k`.
#[pyclass(name = "Tensor", module = "nested_spectra", skip_from_py_object)]
pub struct PyTensor {
    inner: Tensor3,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(dims: (usize, usize, usize), data: Vec<f64>) -> PyResult<Self> {
        let inner = Tensor3::new([dims.0, dims.1, dims.2], data).map_err(py_err)?;
        Ok(PyTensor { inner })
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let [a, b, c] = self.inner.dims();
        (a, b, c)
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, i: usize, j: usize, k: usize) -> PyResult<f64> {
        let [a, b, c] = self.inner.dims();
        if i >= a || j >= b || k >= c {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(i, j, k))
    }

    /// Unfolding along `mode` (1, 2 or 3) as a list of rows.
    fn unfold(&self, mode_index: usize) -> PyResult<Vec<Vec<f64>>> {
        let m = self.inner.unfold(mode(mode_index)?);
        Ok((0..m.rows()).map(|r| m.row(r).to_vec()).collect())
    }

    fn frobenius(&self) -> f64 {
        self.inner.frobenius()
    }

    fn inner(&self, other: &PyTensor) -> PyResult<f64> {
        self.inner.inner(&other.inner).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Tensor(dims={:?})", self.inner.dims())
    }
}

#[pyfunction]
fn outer(u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> PyResult<PyTensor> {
    let inner = nested_spectra::tensor::outer_vvv(&u, &v, &w).map_err(py_err)?;
    Ok(PyTensor { inner })
}

/// Draws the general model. Exactly one of `rho_t`, `beta_t`, `varrho` sets
/// the tensor signal strength. Returns `(tensor, x, y, z)`.
#[pyfunction]
#[pyo3(signature = (dims, beta_m, *, rho_t=None, beta_t=None, varrho=None, seed=0))]
fn sample_general(
    dims: (usize, usize, usize),
    beta_m: f64,
    rho_t: Option<f64>,
    beta_t: Option<f64>,
    varrho: Option<f64>,
    seed: u64,
) -> PyResult<(PyTensor, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let snr = match (rho_t, beta_t, varrho) {
        (Some(r), None, None) => Snr::RhoT(r),
        (None, Some(b), None) => Snr::BetaT(b),
        (None, None, Some(v)) => Snr::Varrho(v),
        _ => return Err(PyValueError::new_err("give exactly one of rho_t, beta_t, varrho")),
    };
    let p = GeneralParams::new([dims.0, dims.1, dims.2], beta_m, snr, seed).map_err(py_err)?;
    let s = model::sample_general(&p).map_err(py_err)?;
    let sig = s.signals;
    Ok((PyTensor { inner: s.tensor }, sig.x, sig.y, sig.z))
}

/// Draws the multi-view model with `μ`, `h` spread evenly over coordinates.
/// Returns `(tensor, labels)`.
#[pyfunction]
#[pyo3(signature = (p, n, m, mu_norm, h_norm, seed=0))]
fn sample_multiview(p: usize, n: usize, m: usize, mu_norm: f64, h_norm: f64, seed: u64) -> PyResult<(PyTensor, Vec<f64>)> {
    let params = MultiViewParams::with_norms(p, n, m, mu_norm, h_norm, seed).map_err(py_err)?;
    let s = model::sample_multiview(&params).map_err(py_err)?;
    Ok((PyTensor { inner: s.tensor }, s.labels))
}

/// Top eigenvector of the mode Gram matrix and its ascending eigenvalues.
#[pyfunction]
fn unfolding_estimate(t: &PyTensor, mode_index: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (est, sr) = estimators::unfolding_estimate(&t.inner, mode(mode_index)?).map_err(py_err)?;
    Ok((est.vector, sr.eigenvalues))
}

/// Right singular vector of `Σ_k z_k T[:,:,k]` and the eigenvalues of its Gram.
#[pyfunction]
fn oracle_estimate(t: &PyTensor, z: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (est, ev) = estimators::oracle_estimate(&t.inner, &z).map_err(py_err)?;
    Ok((est.vector, ev))
}

/// Alternating power iteration; unfolding init unless `seed` is given.
/// Returns `(u, v, w, objective_history)`.
#[pyfunction]
#[pyo3(signature = (t, max_iters=200, tol=1e-10, seed=None))]
fn tensor_rank1_estimate(
    t: &PyTensor,
    max_iters: usize,
    tol: f64,
    seed: Option<u64>,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let init = seed.map_or(Init::Unfolding, |seed| Init::Random { seed });
    let r = estimators::tensor_rank1_estimate(&t.inner, &init, max_iters, tol).map_err(py_err)?;
    Ok((r.x.vector, r.y.vector, r.z.vector, r.history))
}

#[pyfunction]
fn alignment(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    estimators::alignment(&a, &b).map_err(py_err)
}

/// `(accuracy, predicted_labels)` from clustering by sign.
#[pyfunction]
fn cluster_accuracy(yhat: Vec<f64>, labels: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    let r = estimators::cluster_accuracy(&yhat, &labels).map_err(py_err)?;
    Ok((r.accuracy, r.predicted_labels))
}

fn spike_tuple(p: SpikePrediction) -> (f64, f64, bool) {
    (p.location, p.alignment, p.detectable)
}

/// `(location, alignment, detectable)` for the mode-2 spike.
#[pyfunction]
fn spike2(rho_t: f64, beta_m: f64, c: (f64, f64, f64)) -> PyResult<(f64, f64, bool)> {
    theory::spike2(rho_t, beta_m, ratios(c)?).map(spike_tuple).map_err(py_err)
}

#[pyfunction]
fn spike3(varrho: f64) -> PyResult<(f64, f64, bool)> {
    theory::spike3(varrho).map(spike_tuple).map_err(py_err)
}

#[pyfunction]
fn spike_oracle(beta_t: f64, beta_m: f64, c: (f64, f64, f64), varsigma2: f64) -> PyResult<(f64, f64, bool)> {
    theory::spike_oracle(beta_t, beta_m, ratios(c)?, varsigma2)
        .map(spike_tuple)
        .map_err(py_err)
}

#[pyfunction]
fn phase_transition_rho(beta_m: f64, c: (f64, f64, f64)) -> PyResult<f64> {
    theory::phase_transition_rho(beta_m, ratios(c)?).map_err(py_err)
}

#[pyfunction]
fn phase_transition_asymptote(c: (f64, f64, f64)) -> PyResult<f64> {
    Ok(theory::phase_transition_asymptote(ratios(c)?))
}

#[pyfunction]
fn stieltjes_mode2(s: pycomplex::Complex, rho_t: f64, c: (f64, f64, f64)) -> PyResult<pycomplex::Complex> {
    let m = theory::stieltjes_mode2(C64::new(s.re, s.im), rho_t, ratios(c)?).map_err(py_err)?;
    Ok(pycomplex::Complex { re: m.re, im: m.im })
}

#[pyfunction]
fn cubic_bulk_edges(rho_t: f64, c: (f64, f64, f64)) -> PyResult<(f64, f64)> {
    theory::cubic_bulk_edges(rho_t, ratios(c)?).map_err(py_err)
}

#[pyfunction]
fn accuracy_from_alignment(zeta: f64) -> f64 {
    theory::accuracy_from_alignment(zeta)
}

/// Runs a CLI experiment and returns the written file paths.
#[pyfunction]
#[pyo3(signature = (experiment, preset=None, config=None, out=None, trials=None, seed=None))]
fn run_experiment(
    experiment: &str,
    preset: Option<&str>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Vec<PathBuf>> {
    let exp = [
        Experiment::Esd2,
        Experiment::Esd3,
        Experiment::AlignmentMap,
        Experiment::Benchmark,
        Experiment::Phase,
    ]
    .into_iter()
    .find(|e| e.name() == experiment)
    .ok_or_else(|| PyValueError::new_err(format!("unknown experiment '{experiment}'")))?;
    let o = Overrides {
        trials,
        seed,
        output_dir: out,
        ..Overrides::default()
    };
    let cfg = ExperimentConfig::resolve(exp, preset, config.as_deref(), &o).map_err(py_err)?;
    experiments::run(&cfg).map_err(py_err)
}

mod pycomplex {
    use pyo3::prelude::*;
    use pyo3::types::PyComplex;

    /// Python `complex` in and out.
    pub struct Complex {
        pub re: f64,
        pub im: f64,
    }

    impl<'a, 'py> FromPyObject<'a, 'py> for Complex {
        type Error = PyErr;

        fn extract(ob: Borrowed<'a, 'py, PyAny>) -> PyResult<Self> {
            if let Ok(c) = ob.cast::<PyComplex>() {
                return Ok(Complex { re: c.real(), im: c.imag() });
            }
            Ok(Complex { re: ob.extract::<f64>()?, im: 0.0 })
        }
    }

    impl<'py> IntoPyObject<'py> for Complex {
        type Target = PyComplex;
        type Output = Bound<'py, PyComplex>;
        type Error = std::convert::Infallible;

        fn into_pyobject(self, py: Python<'py>) -> Result<Self::Output, Self::Error> {
            Ok(PyComplex::from_doubles(py, self.re, self.im))
        }
    }
}

#[pymodule]
#[pyo3(name = "nested_spectra")]
fn nested_spectra_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", experiments::VERSION)?;
    m.add_class::<PyTensor>()?;
    m.add_function(wrap_pyfunction!(outer, m)?)?;
    m.add_function(wrap_pyfunction!(sample_general, m)?)?;
    m.add_function(wrap_pyfunction!(sample_multiview, m)?)?;
    m.add_function(wrap_pyfunction!(unfolding_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(tensor_rank1_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(alignment, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(spike2, m)?)?;
    m.add_function(wrap_pyfunction!(spike3, m)?)?;
    m.add_function(wrap_pyfunction!(spike_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(phase_transition_rho, m)?)?;
    m.add_function(wrap_pyfunction!(phase_transition_asymptote, m)?)?;
    m.add_function(wrap_pyfunction!(stieltjes_mode2, m)?)?;
    m.add_function(wrap_pyfunction!(cubic_bulk_edges, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy_from_alignment, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
