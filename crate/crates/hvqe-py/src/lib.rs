//! Python bindings: Hamiltonians, exact spectra, measurement patterns,
//! ansatz circuits and the VQE driver.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hvqe::error::Error;
use hvqe::mbqc;
use hvqe::models;
use hvqe::pauli::{self, Pauli};
use hvqe::vqe;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_pauli(axis: &str) -> PyResult<Pauli> {
    match axis {
        "X" | "x" => Ok(Pauli::X),
        "Y" | "y" => Ok(Pauli::Y),
        "Z" | "z" => Ok(Pauli::Z),
        other => Err(PyValueError::new_err(format!("'{other}' is not a Pauli axis"))),
    }
}

/// A Pauli-sum Hamiltonian.
#[pyclass(name = "Hamiltonian", from_py_object)]
#[derive(Clone)]
struct PyHamiltonian {
    inner: pauli::Hamiltonian,
}

#[pymethods]
impl PyHamiltonian {
    #[staticmethod]
    fn z2(lambda_: f64) -> PyResult<Self> {
        Ok(Self { inner: models::z2_hamiltonian(lambda_).map_err(err)? })
    }

    #[staticmethod]
    fn su3(m_tilde: f64, x: f64) -> PyResult<Self> {
        Ok(Self { inner: models::su3_hamiltonian(m_tilde, x).map_err(err)? })
    }

    #[staticmethod]
    fn planar_code(m: usize, n: usize, xi: f64) -> PyResult<Self> {
        Ok(Self { inner: models::planar_code_hamiltonian(m, n, xi).map_err(err)? })
    }

    #[staticmethod]
    fn lih() -> PyResult<Self> {
        Ok(Self { inner: models::lih_hamiltonian().map_err(err)? })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: pauli::Hamiltonian::from_text(text).map_err(err)? })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits
    }

    #[getter]
    fn n_terms(&self) -> usize {
        self.inner.terms.len()
    }

    #[getter]
    fn constant(&self) -> f64 {
        self.inner.constant
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Number of qubit-wise commuting measurement groups.
    fn n_measurement_groups(&self) -> usize {
        pauli::group_commuting(&self.inner).len()
    }

    /// Exact spectrum: dict with energies, gap and ground-state amplitudes.
    fn exact_spectrum<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let sp = models::exact_diagonalize(&self.inner).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("energies", &sp.energies)?;
        d.set_item("e0", sp.e0())?;
        d.set_item("gap", sp.gap())?;
        let amps: Vec<(f64, f64)> =
            sp.ground_state.amps.iter().map(|a| (a.re, a.im)).collect();
        d.set_item("ground_state", amps)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Hamiltonian({} qubits, {} terms)",
            self.inner.n_qubits,
            self.inner.terms.len()
        )
    }
}

/// A measurement-based computation pattern.
#[pyclass(name = "Pattern")]
struct PyPattern {
    inner: mbqc::Pattern,
}

#[pymethods]
impl PyPattern {
    /// The `exp(-i theta/2 P^n)` gadget on `n` body qubits plus one ancilla.
    #[staticmethod]
    fn gadget(n: usize, axis: &str, theta: f64) -> PyResult<Self> {
        let axis = parse_pauli(axis)?;
        Ok(Self { inner: mbqc::gadget_pattern(n, axis, theta).map_err(err)? })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: mbqc::Pattern::from_text(text).map_err(err)? })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Eliminate all Pauli-measured qubits; returns the reduced pattern.
    fn reduce(&self) -> PyResult<Self> {
        Ok(Self { inner: mbqc::reduce(&self.inner).map_err(err)?.pattern })
    }

    /// Entangling-gate count of the compiled circuit.
    fn entangling_count(&self) -> PyResult<usize> {
        let (c, _) = mbqc::compile_to_circuit(&self.inner).map_err(err)?;
        Ok(c.two_qubit_gate_count())
    }

    fn __repr__(&self) -> String {
        format!("Pattern({} qubits)", self.inner.n_qubits())
    }
}

/// The 15-qubit CX/RZ/CX chain pattern that reduces to the 4-qubit gadget.
#[pyfunction]
fn chain_pattern(theta: f64) -> PyResult<PyPattern> {
    Ok(PyPattern { inner: mbqc::chain_pattern(theta).map_err(err)? })
}

/// A parameterized ansatz circuit family.
#[pyclass(name = "Ansatz")]
struct PyAnsatz {
    inner: vqe::Ansatz,
}

#[pymethods]
impl PyAnsatz {
    /// Fully symmetry-shared single-gadget layout (4 parameters).
    #[staticmethod]
    fn gadget_shared(n: usize, axis: &str) -> PyResult<Self> {
        Ok(Self { inner: vqe::Ansatz::GadgetShared { n, axis: parse_pauli(axis)? } })
    }

    /// Layered gadget stack with per-qubit rotations (`(n+1)·L + n` params).
    #[staticmethod]
    fn gadget_stack(n: usize, axes: Vec<String>) -> PyResult<Self> {
        let axes = axes.iter().map(|a| parse_pauli(a)).collect::<PyResult<Vec<_>>>()?;
        Ok(Self { inner: vqe::Ansatz::GadgetStack { n, axes } })
    }

    /// Gate-modified graph-state ansatz for the (m, n) planar-code lattice.
    #[staticmethod]
    fn graph_modified(m: usize, n: usize, layers: usize) -> PyResult<Self> {
        Ok(Self {
            inner: vqe::Ansatz::GraphModified(
                models::pc_graph_ansatz(m, n, layers).map_err(err)?,
            ),
        })
    }

    #[getter]
    fn n_parameters(&self) -> usize {
        self.inner.n_parameters()
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    /// Entangling-gate count of the circuit at `theta`.
    fn entangling_count(&self, theta: Vec<f64>) -> PyResult<usize> {
        Ok(self.inner.build(&theta).map_err(err)?.two_qubit_gate_count())
    }

    /// Exact noiseless expectation of `h` on the ansatz state.
    fn exact_energy(&self, h: &PyHamiltonian, theta: Vec<f64>) -> PyResult<f64> {
        vqe::exact_energy(&self.inner, &theta, &h.inner).map_err(err)
    }
}

/// Run one VQE; returns a summary dict.
#[pyfunction]
#[pyo3(signature = (h, ansatz, initial, max_iters=100, optimizer="local", seed=1))]
fn run_vqe<'py>(
    py: Python<'py>,
    h: &PyHamiltonian,
    ansatz: &PyAnsatz,
    initial: Vec<f64>,
    max_iters: usize,
    optimizer: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let method = match optimizer {
        "local" => vqe::OptimizerMethod::Local,
        "direct" => vqe::OptimizerMethod::DirectThenLocal {
            global_iters: max_iters / 2,
            local_iters: max_iters / 2,
        },
        other => return Err(PyValueError::new_err(format!("unknown optimizer '{other}'"))),
    };
    let cfg = vqe::OptimizerConfig { method, max_iters, initial, bounds: None };
    let rec =
        vqe::run_vqe(&h.inner, &ansatz.inner, &cfg, &vqe::Objective::Exact, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("e_opt", rec.e_opt)?;
    d.set_item("theta_opt", rec.theta_opt)?;
    d.set_item("fidelity", rec.fidelity)?;
    d.set_item("rel_err", rec.rel_err)?;
    d.set_item("e0", rec.e0)?;
    d.set_item("gap", rec.gap)?;
    d.set_item("iterations", rec.iterations.len())?;
    Ok(d)
}

/// Reference starting parameters per model family.
#[pyfunction]
fn default_initial_parameters(model: &str, m_tilde: f64, n_params: usize) -> Vec<f64> {
    vqe::default_initial_parameters(model, m_tilde, n_params)
}

#[pymodule]
fn hvqe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyPattern>()?;
    m.add_class::<PyAnsatz>()?;
    m.add_function(wrap_pyfunction!(chain_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(run_vqe, m)?)?;
    m.add_function(wrap_pyfunction!(default_initial_parameters, m)?)?;
    Ok(())
}
