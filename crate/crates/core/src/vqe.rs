//! Variational eigensolver driver and the fixed-parameter energy benchmark.
//!
//! Each objective evaluation binds θ into the ansatz, expands every
//! non-identity Hamiltonian term into its measurement circuit, scatters the
//! resulting ensemble over the cluster and assembles the weighted energy.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Angle, Circuit, CircuitError, GateKind};
use crate::cluster::{Cluster, ClusterError, EnsembleJob, EnsembleTiming};
use crate::observable::{Mode, ObservableError, PauliOperator};
use crate::optimize::NelderMead;

/// Seed of the published synthetic benchmark Hamiltonian and parameters.
pub const BENCH_SEED: u64 = 3052;

#[derive(Debug, Error)]
pub enum VqeError {
    #[error("theta has {got} entries but the ansatz has {expected} parameters")]
    ThetaLength { expected: usize, got: usize },
    #[error("ansatz acts on {ansatz} qubits but the Hamiltonian needs {hamiltonian}")]
    QubitMismatch { ansatz: usize, hamiltonian: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("objective evaluation {evaluation} failed: {source}")]
    Aborted {
        evaluation: usize,
        /// Energies recorded before the failure.
        energies: Vec<f64>,
        #[source]
        source: Box<VqeError>,
    },
    #[error("benchmark needs at least one worker count")]
    NoWorkerCounts,
    #[error("empty ensemble: the Hamiltonian has no non-identity terms")]
    EmptyEnsemble,
}

type Result<T> = std::result::Result<T, VqeError>;

/// Layered ansatz: per layer an `RY(θ)` on every qubit followed by a CNOT
/// ladder `i → i+1`. Parameter `layer * n + q` drives qubit `q`.
pub fn hardware_efficient_ansatz(num_qubits: usize, depth: usize) -> Circuit {
    assert!(num_qubits >= 1 && depth >= 1, "ansatz needs qubits and layers");
    let mut c = Circuit::new(num_qubits).expect("num_qubits >= 1");
    for layer in 0..depth {
        for q in 0..num_qubits {
            c.append(GateKind::RY, &[q], Some(Angle::Symbol(layer * num_qubits + q)))
                .expect("valid gate");
        }
        for q in 0..num_qubits.saturating_sub(1) {
            c.append(GateKind::CNOT, &[q, q + 1], None).expect("valid gate");
        }
    }
    c
}

#[derive(Debug, Clone)]
pub struct VqeParams {
    /// Symbolic ansatz.
    pub ansatz: Circuit,
    pub hamiltonian: PauliOperator,
    pub theta0: Vec<f64>,
    /// Maximum number of objective evaluations.
    pub max_iters: usize,
    /// Absolute change in the best energy that counts as converged.
    pub ftol: f64,
    pub mode: Mode,
    pub n_virtual_qpus: usize,
}

impl VqeParams {
    pub fn new(ansatz: Circuit, hamiltonian: PauliOperator) -> Self {
        let theta0 = vec![0.0; ansatz.parameter_count()];
        VqeParams {
            ansatz,
            hamiltonian,
            theta0,
            max_iters: 200,
            ftol: 1e-6,
            mode: Mode::Exact,
            n_virtual_qpus: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.ansatz.parameter_count();
        if self.theta0.len() != expected {
            return Err(VqeError::ThetaLength {
                expected,
                got: self.theta0.len(),
            });
        }
        let needed = self
            .hamiltonian
            .terms()
            .iter()
            .filter_map(|t| t.paulis.keys().next_back())
            .max()
            .map_or(0, |q| q + 1);
        if needed > self.ansatz.num_qubits() {
            return Err(VqeError::QubitMismatch {
                ansatz: self.ansatz.num_qubits(),
                hamiltonian: needed,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub execution_seconds: f64,
    pub overhead_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub per_term: Vec<f64>,
    pub circuits_per_worker: Vec<usize>,
    pub ensemble: EnsembleTiming,
    pub timing: Timing,
}

/// One energy evaluation at `theta` over `params.n_virtual_qpus` workers.
pub fn evaluate(theta: &[f64], params: &VqeParams, cluster: &Cluster) -> Result<Evaluation> {
    let start = Instant::now();
    let expected = params.ansatz.parameter_count();
    if theta.len() != expected {
        return Err(VqeError::ThetaLength {
            expected,
            got: theta.len(),
        });
    }
    let bound = params.ansatz.bind_parameters(theta)?;
    let circuits: Vec<Circuit> = params
        .hamiltonian
        .measurement_circuits(&bound)?
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    let result = cluster.scatter_execute(&EnsembleJob {
        circuits,
        mode: params.mode,
        n_virtual_qpus: params.n_virtual_qpus,
    })?;
    let energy = params.hamiltonian.assemble(&result.parities())?;
    let wall = start.elapsed().as_secs_f64();
    let exec = result.timing.max_execution();
    Ok(Evaluation {
        energy: energy.energy,
        per_term: energy.per_term,
        circuits_per_worker: result.circuits_per_worker,
        ensemble: result.timing,
        timing: Timing {
            wall_seconds: wall,
            execution_seconds: exec,
            overhead_seconds: (wall - exec).max(0.0),
        },
    })
}

/// The VQE objective `E(θ) = ⟨ψ(θ)|H|ψ(θ)⟩`.
pub fn vqe_objective(theta: &[f64], params: &VqeParams, cluster: &Cluster) -> Result<f64> {
    evaluate(theta, params, cluster).map(|e| e.energy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    /// Energy of every objective evaluation, in order.
    pub energies: Vec<f64>,
    pub opt_params: Vec<f64>,
    pub opt_val: f64,
    pub evaluations: usize,
    /// Whether the tolerance was met before the evaluation budget ran out.
    pub converged: bool,
    pub timing: Timing,
}

/// Minimizes the energy from `theta0` with a Nelder–Mead simplex.
pub fn vqe_minimize(params: &VqeParams, cluster: &Cluster) -> Result<VqeResult> {
    params.validate()?;
    let start = Instant::now();
    let mut timing = Timing::default();
    let optimizer = NelderMead {
        max_evals: params.max_iters.max(1),
        ftol: params.ftol,
        ..NelderMead::default()
    };
    let outcome = optimizer.minimize(
        |theta| {
            let e = evaluate(theta, params, cluster)?;
            timing.execution_seconds += e.timing.execution_seconds;
            Ok::<f64, VqeError>(e.energy)
        },
        &params.theta0,
    );
    let minimum = outcome.map_err(|a| VqeError::Aborted {
        evaluation: a.history.len(),
        energies: a.history,
        source: Box::new(a.error),
    })?;
    timing.wall_seconds = start.elapsed().as_secs_f64();
    timing.overhead_seconds = (timing.wall_seconds - timing.execution_seconds).max(0.0);
    Ok(VqeResult {
        evaluations: minimum.evaluations(),
        energies: minimum.history,
        opt_params: minimum.x,
        opt_val: minimum.value,
        converged: minimum.converged,
        timing,
    })
}

/// Synthetic workload: hardware-efficient ansatz of `depth` layers, a random
/// `terms`-term Hamiltonian and fixed random parameters in [−π, π], all drawn
/// from `seed`.
pub fn synthetic_problem(qubits: usize, terms: usize, depth: usize, seed: u64) -> VqeParams {
    let ansatz = hardware_efficient_ansatz(qubits, depth);
    let hamiltonian = PauliOperator::random(qubits, terms, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let theta0 = (0..ansatz.parameter_count())
        .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    VqeParams {
        theta0,
        ..VqeParams::new(ansatz, hamiltonian)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub workers: usize,
    pub wall_s: f64,
    pub exec_s: f64,
    pub overhead_s: f64,
    pub circuits_per_worker: Vec<usize>,
    pub energy: f64,
    /// Wall time of the first row divided by this row's wall time.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub qubits: usize,
    pub terms: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("workers,wall_s,exec_s,overhead_s,circuits_per_worker,energy,speedup\n");
        for r in &self.rows {
            let per: Vec<String> = r.circuits_per_worker.iter().map(|n| n.to_string()).collect();
            out += &format!(
                "{},{:.6},{:.6},{:.6},{},{:?},{:.4}\n",
                r.workers,
                r.wall_s,
                r.exec_s,
                r.overhead_s,
                per.join(";"),
                r.energy,
                r.speedup
            );
        }
        out
    }
}

/// Evaluates the energy at the fixed `params.theta0` once per worker count.
/// Each row uses the first `k` workers of the cluster.
pub fn fixed_point_energy_benchmark(
    params: &VqeParams,
    worker_counts: &[usize],
    cluster: &Cluster,
) -> Result<BenchReport> {
    params.validate()?;
    if worker_counts.is_empty() {
        return Err(VqeError::NoWorkerCounts);
    }
    if params.hamiltonian.terms().iter().all(|t| t.is_identity()) {
        return Err(VqeError::EmptyEnsemble);
    }
    if let Some(&k) = worker_counts.iter().find(|&&k| k == 0 || k > cluster.len()) {
        return Err(if k == 0 {
            ClusterError::NoWorkers
        } else {
            ClusterError::NotEnoughWorkers {
                requested: k,
                available: cluster.len(),
            }
        }
        .into());
    }
    let mut rows: Vec<BenchRow> = Vec::with_capacity(worker_counts.len());
    for &k in worker_counts {
        let run = VqeParams {
            n_virtual_qpus: k,
            ..params.clone()
        };
        let e = evaluate(&params.theta0, &run, cluster)?;
        let baseline = rows.first().map_or(e.timing.wall_seconds, |r| r.wall_s);
        rows.push(BenchRow {
            workers: k,
            wall_s: e.timing.wall_seconds,
            exec_s: e.timing.execution_seconds,
            overhead_s: e.timing.overhead_seconds,
            circuits_per_worker: e.circuits_per_worker,
            energy: e.energy,
            speedup: baseline / e.timing.wall_seconds,
        });
    }
    Ok(BenchReport {
        qubits: params.ansatz.num_qubits(),
        terms: params.hamiltonian.len(),
        rows,
    })
}
