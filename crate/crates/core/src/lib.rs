//! Orchestration of classically-parallel quantum workloads.
//!
//! Circuits are built programmatically ([`circuit`]) or parsed from
//! OpenQASM ([`qasm`]) and executed by a statevector backend ([`sim`]).
//! Hamiltonians ([`observable`]) expand into one measurement circuit per
//! Pauli term. Ensembles run on worker daemons ([`worker`]) either through
//! the asynchronous round-robin [`pool`] or the scatter/gather [`cluster`]
//! coordinator, which also powers the [`vqe`] driver and benchmark.

pub mod circuit;
pub mod cluster;
pub mod observable;
pub mod optimize;
pub mod pool;
pub mod protocol;
pub mod qasm;
pub mod sim;
pub mod vqe;
pub mod worker;

pub use circuit::{Angle, Circuit, CircuitBuilder, CircuitError, Gate, GateKind};
pub use cluster::{partition, Cluster, ClusterError, EnsembleJob, EnsembleResult, LocalCluster};
pub use observable::{Mode, Pauli, PauliOperator, PauliTerm};
pub use pool::{
    shots_for_precision, wait_all, ExecutorPool, JobHandle, JobState, JobTable, PoolConfig,
    PoolError, WorkerEndpoint,
};
pub use qasm::{emit_qasm, parse_qasm, QasmError};
pub use sim::{CountsResult, SimError, Simulator, StateVector};
pub use vqe::{hardware_efficient_ansatz, vqe_minimize, vqe_objective, VqeParams, VqeResult};
pub use worker::{WorkerConfig, WorkerDaemon, WorkerHandle};
