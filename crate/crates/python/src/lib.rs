use std::collections::BTreeMap;
use std::time::Duration;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use qvirt::observable::Mode;
use qvirt::pool::JobState;
use qvirt::protocol::{self, Request};
use qvirt::vqe::VqeError;
use qvirt::{
    hardware_efficient_ansatz, vqe_minimize, Angle, ClusterError, ExecutorPool, GateKind, JobTable,
    LocalCluster, PoolConfig, PoolError, Simulator, VqeParams, WorkerConfig,
};

create_exception!(pyqvirt, TransportError, PyException);
create_exception!(pyqvirt, NotReadyError, PyException);

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pool_err(e: PoolError) -> PyErr {
    match e {
        PoolError::Exhausted | PoolError::Timeout { .. } | PoolError::Closed => {
            TransportError::new_err(e.to_string())
        }
        _ => value_err(e),
    }
}

fn cluster_err(e: ClusterError) -> PyErr {
    match e {
        ClusterError::WorkerFailed { .. } => TransportError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

type GateTuple = (String, Vec<usize>, Py<PyAny>);

/// A quantum circuit over the built-in gate set.
#[pyclass(module = "pyqvirt", from_py_object)]
#[derive(Clone)]
struct Circuit {
    inner: qvirt::Circuit,
}

#[pymethods]
impl Circuit {
    #[new]
    fn new(num_qubits: usize) -> PyResult<Self> {
        qvirt::Circuit::new(num_qubits)
            .map(|inner| Circuit { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn from_qasm(source: &str) -> PyResult<Self> {
        parse_qasm(source)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        qvirt::Circuit::from_json(text)
            .map(|inner| Circuit { inner })
            .map_err(value_err)
    }

    fn to_qasm(&self) -> String {
        qvirt::emit_qasm(&self.inner)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    /// `(qubit, clbit)` pairs in measurement order.
    #[getter]
    fn measurements(&self) -> Vec<(usize, usize)> {
        self.inner.measurements().to_vec()
    }

    /// Gates as `(name, qubits, angle)`; symbolic angles read `"theta_i"`.
    fn gates(&self, py: Python<'_>) -> PyResult<Vec<GateTuple>> {
        self.inner
            .gates()
            .iter()
            .map(|g| {
                let angle = match g.angle {
                    None => py.None(),
                    Some(Angle::Literal(t)) => t.into_pyobject(py)?.into_any().unbind(),
                    Some(Angle::Symbol(i)) => format!("theta_{i}").into_pyobject(py)?.into_any().unbind(),
                };
                Ok((g.kind.qasm_name().to_string(), g.qubits.clone(), angle))
            })
            .collect()
    }

    /// Appends a gate by OpenQASM name. `angle` is a float or a parameter index.
    #[pyo3(signature = (name, qubits, angle=None, parameter=None))]
    fn append(&mut self, name: &str, qubits: Vec<usize>, angle: Option<f64>, parameter: Option<usize>) -> PyResult<()> {
        let kind = GateKind::from_qasm_name(name).ok_or_else(|| value_err(format!("unknown gate {name:?}")))?;
        let angle = match (angle, parameter) {
            (Some(_), Some(_)) => return Err(value_err("give either angle or parameter")),
            (Some(t), None) => Some(Angle::Literal(t)),
            (None, Some(i)) => Some(Angle::Symbol(i)),
            (None, None) => None,
        };
        self.inner.append(kind, &qubits, angle).map(|_| ()).map_err(value_err)
    }

    fn measure(&mut self, qubit: usize, clbit: usize) -> PyResult<()> {
        self.inner.measure(qubit, clbit).map(|_| ()).map_err(value_err)
    }

    fn measure_all(&mut self) -> PyResult<()> {
        self.inner.measure_all().map(|_| ()).map_err(value_err)
    }

    fn bind(&self, theta: Vec<f64>) -> PyResult<Circuit> {
        self.inner
            .bind_parameters(&theta)
            .map(|inner| Circuit { inner })
            .map_err(value_err)
    }

    fn __eq__(&self, other: &Circuit) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Circuit(num_qubits={}, gates={}, measurements={})",
            self.inner.num_qubits(),
            self.inner.gates().len(),
            self.inner.measurements().len()
        )
    }
}

#[pyfunction]
fn parse_qasm(source: &str) -> PyResult<Circuit> {
    qvirt::parse_qasm(source)
        .map(|inner| Circuit { inner })
        .map_err(value_err)
}

#[pyfunction]
fn emit_qasm(circuit: &Circuit) -> String {
    qvirt::emit_qasm(&circuit.inner)
}

/// Final statevector amplitudes; index bit `q` is qubit `q`.
#[pyfunction]
fn statevector(py: Python<'_>, circuit: &Circuit) -> PyResult<Vec<Complex64>> {
    let c = circuit.inner.clone();
    py.detach(|| Simulator::default().simulate(&c))
        .map(|s| s.amplitudes().to_vec())
        .map_err(value_err)
}

/// Samples the measured qubits; keys are clbit strings, clbit 0 leftmost.
#[pyfunction]
#[pyo3(signature = (circuit, shots, seed=0))]
fn run(py: Python<'_>, circuit: &Circuit, shots: u64, seed: u64) -> PyResult<BTreeMap<String, u64>> {
    let c = circuit.inner.clone();
    py.detach(|| Simulator::default().run(&c, shots, seed))
        .map(|r| r.counts)
        .map_err(value_err)
}

#[pyfunction]
fn shots_for_precision(epsilon: f64) -> PyResult<u64> {
    qvirt::shots_for_precision(epsilon).map_err(value_err)
}

/// Weighted sum of Pauli strings.
#[pyclass(module = "pyqvirt", from_py_object)]
#[derive(Clone)]
struct PauliOperator {
    inner: qvirt::PauliOperator,
}

#[pymethods]
impl PauliOperator {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        qvirt::PauliOperator::parse(text)
            .map(|inner| PauliOperator { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn random(num_qubits: usize, num_terms: usize, seed: u64) -> PyResult<Self> {
        if num_qubits == 0 || num_qubits > 24 || (num_terms as f64) > 4f64.powi(num_qubits as i32) - 1.0 {
            return Err(value_err("not enough distinct Pauli strings"));
        }
        Ok(PauliOperator {
            inner: qvirt::PauliOperator::random(num_qubits, num_terms, seed),
        })
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits()
    }

    /// `(coefficient, "X0 Z2")` pairs.
    fn terms(&self) -> Vec<(f64, String)> {
        self.inner
            .terms()
            .iter()
            .map(|t| {
                let s: Vec<String> = t.paulis.iter().map(|(q, p)| format!("{p:?}{q}")).collect();
                (t.coefficient, s.join(" "))
            })
            .collect()
    }

    /// Ansatz plus basis change and measurement for every non-identity term.
    fn measurement_circuits(&self, ansatz: &Circuit) -> PyResult<Vec<Circuit>> {
        self.inner
            .measurement_circuits(&ansatz.inner)
            .map(|cs| cs.into_iter().map(|(_, inner)| Circuit { inner }).collect())
            .map_err(value_err)
    }

    /// `⟨ψ|H|ψ⟩` for a literal ansatz; sampled when `shots` is given.
    #[pyo3(signature = (ansatz, shots=None, seed=0))]
    fn expectation(&self, py: Python<'_>, ansatz: &Circuit, shots: Option<u64>, seed: u64) -> PyResult<f64> {
        let mode = shots.map_or(Mode::Exact, |shots| Mode::Shots { shots, seed });
        let (h, c) = (self.inner.clone(), ansatz.inner.clone());
        py.detach(|| h.expectation(&c, mode, &Simulator::default()))
            .map(|e| e.energy)
            .map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("PauliOperator({:?})", self.inner.to_string())
    }
}

/// Worker daemons on background threads of this process.
#[pyclass(module = "pyqvirt")]
struct LocalWorkers {
    inner: LocalCluster,
}

#[pymethods]
impl LocalWorkers {
    #[new]
    #[pyo3(signature = (n, delay_ms=0))]
    fn new(n: usize, delay_ms: u64) -> PyResult<Self> {
        let config = WorkerConfig {
            delay: Duration::from_millis(delay_ms),
            ..WorkerConfig::default()
        };
        LocalCluster::spawn(n, config)
            .map(|inner| LocalWorkers { inner })
            .map_err(|e| TransportError::new_err(e.to_string()))
    }

    #[getter]
    fn addresses(&self) -> Vec<String> {
        self.inner.addresses().iter().map(|a| a.to_string()).collect()
    }

    /// Stops worker `i`, dropping its open connections.
    fn kill(&mut self, i: usize) -> PyResult<()> {
        let h = self
            .inner
            .handles
            .get_mut(i)
            .ok_or_else(|| PyIndexError::new_err(format!("no worker {i}")))?;
        h.kill();
        Ok(())
    }

    fn __len__(&self) -> usize {
        self.inner.handles.len()
    }
}

/// Tracks one offloaded circuit.
#[pyclass(module = "pyqvirt")]
struct JobHandle {
    inner: qvirt::JobHandle,
}

#[pymethods]
impl JobHandle {
    #[getter]
    fn job_id(&self) -> u64 {
        self.inner.job_id()
    }

    #[getter]
    fn endpoint(&self) -> String {
        self.inner.endpoint().address().to_string()
    }

    /// One of `queued`, `sent`, `running`, `complete`, `failed`.
    fn state(&self) -> String {
        self.inner.state().to_string()
    }

    fn complete(&self) -> bool {
        self.inner.complete()
    }

    fn transitions(&self) -> Vec<String> {
        self.inner.transitions().iter().map(ToString::to_string).collect()
    }

    /// Counts of a completed job. Raises `NotReadyError` before completion
    /// and `TransportError` if the job failed.
    fn result(&self) -> PyResult<BTreeMap<String, u64>> {
        match self.inner.state() {
            JobState::Complete => Ok(self.inner.result().expect("complete").counts),
            JobState::Failed => Err(TransportError::new_err(self.inner.error().unwrap_or_default())),
            s => Err(NotReadyError::new_err(format!("job {} is {s}", self.inner.job_id()))),
        }
    }

    /// Blocks up to `timeout` seconds; returns the state reached.
    fn wait(&self, py: Python<'_>, timeout: f64) -> String {
        let h = self.inner.clone();
        py.detach(|| h.wait(Duration::from_secs_f64(timeout.max(0.0)))).to_string()
    }
}

/// Round-robin asynchronous pool over worker endpoints.
#[pyclass(module = "pyqvirt")]
struct Pool {
    inner: ExecutorPool,
}

#[pymethods]
impl Pool {
    #[new]
    fn new(addresses: Vec<String>) -> PyResult<Self> {
        ExecutorPool::from_addresses(&addresses, PoolConfig::default())
            .map(|inner| Pool { inner })
            .map_err(pool_err)
    }

    /// Submits to the next healthy endpoint without waiting.
    #[pyo3(signature = (circuit, shots, seed=0))]
    fn submit(&self, circuit: &Circuit, shots: u64, seed: u64) -> PyResult<JobHandle> {
        let ep = self.inner.get_next_available_qpu().map_err(pool_err)?;
        self.inner
            .async_execute(&ep, circuit.inner.clone(), shots, seed)
            .map(|inner| JobHandle { inner })
            .map_err(pool_err)
    }

    /// Dispatched job count per endpoint address.
    fn dispatched(&self) -> BTreeMap<String, usize> {
        self.inner
            .endpoints()
            .iter()
            .map(|e| (e.address().to_string(), e.dispatched()))
            .collect()
    }
}

/// Parameter-scan session: one OpenQASM circuit, one column per θ.
#[pyclass(module = "pyqvirt")]
struct Session {
    pool: ExecutorPool,
    #[pyo3(get, set)]
    instring: String,
    table: JobTable,
}

#[pymethods]
impl Session {
    #[new]
    fn new(endpoints: Vec<String>) -> PyResult<Self> {
        Ok(Session {
            pool: ExecutorPool::from_addresses(&endpoints, PoolConfig::default()).map_err(pool_err)?,
            instring: String::new(),
            table: JobTable::default(),
        })
    }

    /// Parses `instring` and makes one column per θ vector; column `j`
    /// samples with seed `seed + j`.
    #[pyo3(signature = (thetas, shots, seed=0))]
    fn set_parameters(&mut self, thetas: Vec<Vec<f64>>, shots: u64, seed: u64) -> PyResult<()> {
        let circuit = qvirt::parse_qasm(&self.instring).map_err(value_err)?;
        self.table = JobTable::scan(circuit, &thetas, shots, seed);
        Ok(())
    }

    /// Submits cell `(row, column)` of the job table.
    fn run_async(&self, row: usize, column: usize) -> PyResult<JobHandle> {
        self.pool
            .run_async(&self.table, row, column)
            .map(|inner| JobHandle { inner })
            .map_err(pool_err)
    }
}

/// Wire frame (4-byte big-endian length + JSON) of the `execute` request for
/// a literal circuit.
#[pyfunction]
#[pyo3(signature = (circuit, shots, seed, job_id=0))]
fn execute_frame<'py>(
    py: Python<'py>,
    circuit: &Circuit,
    shots: Option<u64>,
    seed: u64,
    job_id: u64,
) -> PyResult<Bound<'py, PyBytes>> {
    let request = Request::Execute {
        job_id,
        circuit: circuit.inner.clone(),
        shots,
        seed,
    };
    let mut frame = Vec::new();
    protocol::send(&mut frame, &request).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PyBytes::new(py, &frame))
}

/// Minimizes `hamiltonian` over a hardware-efficient ansatz of `depth`
/// layers using `workers` in-process workers.
#[pyfunction]
#[pyo3(signature = (hamiltonian, depth=1, max_iters=200, ftol=1e-6, workers=1, theta0=None, shots=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn vqe(
    py: Python<'_>,
    hamiltonian: &PauliOperator,
    depth: usize,
    max_iters: usize,
    ftol: f64,
    workers: usize,
    theta0: Option<Vec<f64>>,
    shots: Option<u64>,
    seed: u64,
) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    if depth == 0 || workers == 0 {
        return Err(value_err("depth and workers must be positive"));
    }
    let ansatz = hardware_efficient_ansatz(hamiltonian.inner.num_qubits(), depth);
    let mut params = VqeParams::new(ansatz, hamiltonian.inner.clone());
    if let Some(t) = theta0 {
        params.theta0 = t;
    }
    params.max_iters = max_iters;
    params.ftol = ftol;
    params.n_virtual_qpus = workers;
    params.mode = shots.map_or(Mode::Exact, |shots| Mode::Shots { shots, seed });
    let result = py.detach(|| {
        let cluster = LocalCluster::spawn(workers, WorkerConfig::default()).map_err(|e| e.to_string())?;
        vqe_minimize(&params, cluster.cluster()).map_err(|e| match e {
            VqeError::Aborted { source, .. } => source.to_string(),
            other => other.to_string(),
        })
    });
    let r = result.map_err(value_err)?;
    Ok((r.opt_val, r.opt_params, r.energies))
}

/// Energies of one ensemble evaluation on `workers` in-process workers.
#[pyfunction]
#[pyo3(signature = (hamiltonian, ansatz, workers=1))]
fn distributed_energy(py: Python<'_>, hamiltonian: &PauliOperator, ansatz: &Circuit, workers: usize) -> PyResult<f64> {
    let (h, c) = (hamiltonian.inner.clone(), ansatz.inner.clone());
    py.detach(|| -> PyResult<f64> {
        let cluster = LocalCluster::spawn(workers, WorkerConfig::default())
            .map_err(|e| TransportError::new_err(e.to_string()))?;
        let circuits = h
            .measurement_circuits(&c)
            .map_err(value_err)?
            .into_iter()
            .map(|(_, c)| c)
            .collect();
        let result = cluster
            .cluster()
            .scatter_execute(&qvirt::EnsembleJob {
                circuits,
                mode: Mode::Exact,
                n_virtual_qpus: workers,
            })
            .map_err(cluster_err)?;
        h.assemble(&result.parities()).map(|e| e.energy).map_err(value_err)
    })
}

#[pymodule]
fn pyqvirt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PROTOCOL_VERSION", protocol::PROTOCOL_VERSION)?;
    m.add("TransportError", m.py().get_type::<TransportError>())?;
    m.add("NotReadyError", m.py().get_type::<NotReadyError>())?;
    m.add_class::<Circuit>()?;
    m.add_class::<PauliOperator>()?;
    m.add_class::<LocalWorkers>()?;
    m.add_class::<JobHandle>()?;
    m.add_class::<Pool>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(parse_qasm, m)?)?;
    m.add_function(wrap_pyfunction!(emit_qasm, m)?)?;
    m.add_function(wrap_pyfunction!(statevector, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(shots_for_precision, m)?)?;
    m.add_function(wrap_pyfunction!(execute_frame, m)?)?;
    m.add_function(wrap_pyfunction!(vqe, m)?)?;
    m.add_function(wrap_pyfunction!(distributed_energy, m)?)?;
    Ok(())
}
