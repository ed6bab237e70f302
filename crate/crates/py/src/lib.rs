//! Python bindings: matrices, operator builders, closed-form predictions and
//! full simulation runs driven by a JSON config.

use num_complex::Complex64 as C64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use micromaser::analytics;
use micromaser::cli::{csv_string, PredictSummary, RunSummary};
use micromaser::config::{parse_config, SimulationConfig};
use micromaser::dynamics;
use micromaser::hilbert::{self, Collective, FockTruncation, Pauli, Transition};
use micromaser::linalg::{self, HilbertSpec};
use micromaser::models::{self, CouplingSpec, FieldSpec, ReservoirKind, ReservoirSpec};
use micromaser::Error;

create_exception!(micromaser_py, MicromaserError, PyException);
create_exception!(micromaser_py, TruncationError, MicromaserError);
create_exception!(micromaser_py, GainRegimeError, MicromaserError);
create_exception!(micromaser_py, DivergenceError, MicromaserError);

fn to_py(err: Error) -> PyErr {
    let msg = err.to_string();
    match err {
        Error::Truncation { .. } => TruncationError::new_err(msg),
        Error::GainRegime(_) => GainRegimeError::new_err(msg),
        Error::Divergence(_) => DivergenceError::new_err(msg),
        Error::Io(_) | Error::Fit(_) | Error::UndefinedCorrelation { .. } => MicromaserError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for micromaser::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Dense complex matrix.
#[pyclass(name = "ComplexMatrix", module = "micromaser_py", from_py_object)]
#[derive(Clone)]
pub struct PyMatrix {
    inner: linalg::ComplexMatrix,
}

impl From<linalg::ComplexMatrix> for PyMatrix {
    fn from(inner: linalg::ComplexMatrix) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl PyMatrix {
    /// Builds a matrix from a list of rows of (complex) numbers.
    #[new]
    fn new(rows: Vec<Vec<C64>>) -> PyResult<Self> {
        Ok(linalg::ComplexMatrix::from_rows(&rows).py_err()?.into())
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        linalg::ComplexMatrix::identity(n).into()
    }

    #[staticmethod]
    fn zeros(rows: usize, cols: usize) -> Self {
        linalg::ComplexMatrix::zeros(rows, cols).into()
    }

    #[staticmethod]
    fn diag(values: Vec<C64>) -> Self {
        linalg::ComplexMatrix::from_diag(&values).into()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn to_list(&self) -> Vec<Vec<C64>> {
        (0..self.inner.rows()).map(|i| self.inner.row(i).to_vec()).collect()
    }

    fn diagonal(&self) -> Vec<C64> {
        self.inner.diagonal()
    }

    fn trace(&self) -> C64 {
        self.inner.trace()
    }

    fn adjoint(&self) -> Self {
        self.inner.adjoint().into()
    }

    fn hermiticity_defect(&self) -> f64 {
        self.inner.hermiticity_defect()
    }

    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        linalg::hermitian_eigenvalues(&self.inner).py_err()
    }

    fn __getitem__(&self, index: (usize, usize)) -> PyResult<C64> {
        let (r, c) = self.inner.shape();
        if index.0 >= r || index.1 >= c {
            return Err(pyo3::exceptions::PyIndexError::new_err(format!("{index:?} outside {r}x{c}")));
        }
        Ok(self.inner[index])
    }

    fn __matmul__(&self, other: &PyMatrix) -> PyResult<Self> {
        Ok(self.inner.try_matmul(&other.inner).py_err()?.into())
    }

    fn __add__(&self, other: &PyMatrix) -> PyResult<Self> {
        Ok(self.inner.try_add(&other.inner).py_err()?.into())
    }

    fn __sub__(&self, other: &PyMatrix) -> PyResult<Self> {
        Ok(self.inner.try_sub(&other.inner).py_err()?.into())
    }

    fn __mul__(&self, s: C64) -> Self {
        self.inner.scale(s).into()
    }

    fn __rmul__(&self, s: C64) -> Self {
        self.inner.scale(s).into()
    }

    fn __repr__(&self) -> String {
        let (r, c) = self.inner.shape();
        format!("ComplexMatrix({r}x{c})")
    }
}

#[pyfunction]
fn kron(a: &PyMatrix, b: &PyMatrix) -> PyResult<PyMatrix> {
    Ok(linalg::kron(&a.inner, &b.inner).py_err()?.into())
}

/// Reduced state of subsystem `keep` of a composite with sub-dimensions `dims`.
#[pyfunction]
fn partial_trace(rho: &PyMatrix, dims: Vec<usize>, keep: usize) -> PyResult<PyMatrix> {
    let spec = HilbertSpec::new(dims).py_err()?;
    Ok(linalg::partial_trace(&rho.inner, &spec, keep).py_err()?.into())
}

#[pyfunction]
fn expm(m: &PyMatrix) -> PyResult<PyMatrix> {
    Ok(linalg::expm(&m.inner).py_err()?.into())
}

fn fock(dim: usize) -> PyResult<FockTruncation> {
    FockTruncation::new(dim).py_err()
}

#[pyfunction]
fn annihilation(dim: usize) -> PyResult<PyMatrix> {
    Ok(hilbert::annihilation(fock(dim)?).into())
}

#[pyfunction]
fn creation(dim: usize) -> PyResult<PyMatrix> {
    Ok(hilbert::creation(fock(dim)?).into())
}

#[pyfunction]
fn number_op(dim: usize) -> PyResult<PyMatrix> {
    Ok(hilbert::number_op(fock(dim)?).into())
}

/// One of "x", "y", "z", "plus", "minus".
#[pyfunction]
fn pauli(which: &str) -> PyResult<PyMatrix> {
    let p = match which {
        "x" => Pauli::X,
        "y" => Pauli::Y,
        "z" => Pauli::Z,
        "plus" => Pauli::Plus,
        "minus" => Pauli::Minus,
        _ => return Err(PyValueError::new_err(format!("unknown Pauli operator `{which}`"))),
    };
    Ok(hilbert::pauli(p).into())
}

/// One of "z", "plus", "minus" on `n` two-level atoms.
#[pyfunction]
fn collective_spin(n: usize, which: &str) -> PyResult<PyMatrix> {
    let c = match which {
        "z" => Collective::Z,
        "plus" => Collective::Plus,
        "minus" => Collective::Minus,
        _ => return Err(PyValueError::new_err(format!("unknown collective operator `{which}`"))),
    };
    Ok(hilbert::collective_spin(n, c).py_err()?.into())
}

#[pyfunction]
fn multilevel_transition(n: usize, which: &str) -> PyResult<PyMatrix> {
    let t = match which {
        "plus" => Transition::Plus,
        "minus" => Transition::Minus,
        _ => return Err(PyValueError::new_err(format!("unknown transition `{which}`"))),
    };
    Ok(hilbert::multilevel_transition(n, t).py_err()?.into())
}

#[pyfunction]
#[pyo3(signature = (temperature, omega = 1.0))]
fn two_level_populations(temperature: f64, omega: f64) -> PyResult<(f64, f64)> {
    models::two_level_populations(omega, temperature).py_err()
}

#[pyfunction]
#[pyo3(signature = (n, temperature, omega = 1.0))]
fn multilevel_populations(n: usize, temperature: f64, omega: f64) -> PyResult<(f64, f64)> {
    models::multilevel_populations(n, omega, temperature).py_err()
}

#[pyfunction]
#[pyo3(signature = (dim, temperature, omega = 1.0))]
fn thermal_field_state(dim: usize, temperature: f64, omega: f64) -> PyResult<PyMatrix> {
    let field = FieldSpec::new(omega, fock(dim)?, temperature).py_err()?;
    Ok(models::thermal_field_state(&field).into())
}

#[pyfunction]
fn mean_photon_number(rho: &PyMatrix) -> f64 {
    analytics::mean_photon_number(&rho.inner)
}

#[pyfunction]
fn g2_zero(rho: &PyMatrix) -> PyResult<f64> {
    analytics::g2_zero(&rho.inner).py_err()
}

#[pyfunction]
#[pyo3(signature = (n_bar, omega = 1.0))]
fn field_temperature(n_bar: f64, omega: f64) -> f64 {
    analytics::field_temperature(n_bar, omega)
}

#[pyfunction]
#[pyo3(signature = (temperature, omega = 1.0))]
fn bose_einstein_occupation(temperature: f64, omega: f64) -> PyResult<f64> {
    analytics::bose_einstein_occupation(omega, temperature).py_err()
}

fn kind(name: &str) -> PyResult<ReservoirKind> {
    match name {
        "multi-atom" => Ok(ReservoirKind::MultiAtom),
        "multi-level" => Ok(ReservoirKind::MultiLevel),
        _ => Err(PyValueError::new_err(format!("unknown reservoir kind `{name}`"))),
    }
}

fn specs(kind_name: &str, n: usize, t_a: f64, g: f64, tau: f64, tau0: f64, omega: f64) -> PyResult<(ReservoirSpec, CouplingSpec)> {
    let reservoir = ReservoirSpec::new(kind(kind_name)?, n, t_a, omega).py_err()?;
    let coupling = CouplingSpec::new(g, tau, tau0, 0.0, 0.0).py_err()?;
    Ok((reservoir, coupling))
}

/// (upward, downward) photon rates.
#[pyfunction]
#[pyo3(signature = (kind, n, t_a, g, tau, tau0 = 0.0, omega = 1.0))]
fn rates(kind: &str, n: usize, t_a: f64, g: f64, tau: f64, tau0: f64, omega: f64) -> PyResult<(f64, f64)> {
    let (r, c) = specs(kind, n, t_a, g, tau, tau0, omega)?;
    let p = analytics::rates(&r, &c).py_err()?;
    Ok((p.upward, p.downward))
}

#[pyfunction]
#[pyo3(signature = (kind, n, t_a, g, tau, tau0 = 0.0, omega = 1.0))]
#[allow(clippy::too_many_arguments)]
fn thermalization_time<'py>(
    py: Python<'py>,
    kind: &str,
    n: usize,
    t_a: f64,
    g: f64,
    tau: f64,
    tau0: f64,
    omega: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (r, c) = specs(kind, n, t_a, g, tau, tau0, omega)?;
    let p = analytics::thermalization_time(&r, &c).py_err()?;
    let d = PyDict::new(py);
    d.set_item("upward_rate", p.rates.upward)?;
    d.set_item("downward_rate", p.rates.downward)?;
    d.set_item("gamma", p.gamma)?;
    d.set_item("t_th", p.t_th)?;
    d.set_item("n_bar_th", p.n_bar_th)?;
    d.set_item("low_temperature_approx", p.low_temperature_approx)?;
    Ok(d)
}

#[pyfunction]
fn analytic_trajectory(n0: f64, n_th: f64, gamma: f64, times: Vec<f64>) -> Vec<f64> {
    analytics::analytic_trajectory(n0, n_th, gamma, &times)
}

fn config(text: &str) -> PyResult<SimulationConfig> {
    parse_config(text).py_err()
}

/// Closed-form predictions for a JSON config.
#[pyfunction]
fn predict<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let p = PredictSummary::new(&config(config_json)?).py_err()?;
    let d = PyDict::new(py);
    d.set_item("upward_rate", p.upward_rate)?;
    d.set_item("downward_rate", p.downward_rate)?;
    d.set_item("gamma", p.gamma)?;
    d.set_item("t_th", p.t_th)?;
    d.set_item("t_th_low_temperature", p.t_th_low_temperature)?;
    d.set_item("n_bar_th", p.n_bar_th)?;
    d.set_item("t_field_steady", p.t_field_steady)?;
    d.set_item("t_multilevel_reservoir", p.t_multilevel_reservoir)?;
    d.set_item("t_multilevel_effective", p.t_multilevel_effective)?;
    Ok(d)
}

/// Runs a simulation from a JSON config. Returns the time series columns,
/// the run summary and the CSV text the command-line tool would write.
#[pyfunction]
fn run_simulation<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(config_json)?;
    let series = py.detach(|| dynamics::run_simulation(&cfg)).py_err()?;
    let summary = RunSummary::from_series(&series, &cfg).py_err()?;

    let d = PyDict::new(py);
    d.set_item("times", series.times.clone())?;
    d.set_item("n_mean", series.n_mean.clone())?;
    d.set_item("t_field", series.t_field.clone())?;
    d.set_item("g2", series.g2.clone())?;
    d.set_item("trace_dev", series.trace_dev.clone())?;
    d.set_item("tail_leak", series.tail_leak.clone())?;
    d.set_item("min_eigenvalue", series.min_eigenvalue.clone())?;
    d.set_item("csv", csv_string(&series).py_err()?)?;
    if let Some(rho) = series.final_state.clone() {
        d.set_item("final_state", PyMatrix::from(rho))?;
    }
    let s = PyDict::new(py);
    s.set_item("collisions", summary.collisions)?;
    s.set_item("t_field_steady", summary.t_field_steady)?;
    s.set_item("gamma_fit", summary.gamma_fit)?;
    s.set_item("t_th_fit", summary.t_th_fit)?;
    s.set_item("g2_final", summary.g2_final)?;
    s.set_item("t_th_predicted", summary.t_th_predicted)?;
    s.set_item("gamma_predicted", summary.gamma_predicted)?;
    d.set_item("summary", s)?;
    Ok(d)
}

#[pymodule]
fn micromaser_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("MicromaserError", py.get_type::<MicromaserError>())?;
    m.add("TruncationError", py.get_type::<TruncationError>())?;
    m.add("GainRegimeError", py.get_type::<GainRegimeError>())?;
    m.add("DivergenceError", py.get_type::<DivergenceError>())?;
    m.add_class::<PyMatrix>()?;
    m.add_function(wrap_pyfunction!(kron, m)?)?;
    m.add_function(wrap_pyfunction!(partial_trace, m)?)?;
    m.add_function(wrap_pyfunction!(expm, m)?)?;
    m.add_function(wrap_pyfunction!(annihilation, m)?)?;
    m.add_function(wrap_pyfunction!(creation, m)?)?;
    m.add_function(wrap_pyfunction!(number_op, m)?)?;
    m.add_function(wrap_pyfunction!(pauli, m)?)?;
    m.add_function(wrap_pyfunction!(collective_spin, m)?)?;
    m.add_function(wrap_pyfunction!(multilevel_transition, m)?)?;
    m.add_function(wrap_pyfunction!(two_level_populations, m)?)?;
    m.add_function(wrap_pyfunction!(multilevel_populations, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_field_state, m)?)?;
    m.add_function(wrap_pyfunction!(mean_photon_number, m)?)?;
    m.add_function(wrap_pyfunction!(g2_zero, m)?)?;
    m.add_function(wrap_pyfunction!(field_temperature, m)?)?;
    m.add_function(wrap_pyfunction!(bose_einstein_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(rates, m)?)?;
    m.add_function(wrap_pyfunction!(thermalization_time, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    Ok(())
}
