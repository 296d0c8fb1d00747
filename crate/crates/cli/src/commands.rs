use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Duration;

use qvirt::observable::Mode;
use qvirt::pool::{linspace, JobState};
use qvirt::protocol::Outcome;
use qvirt::vqe::{fixed_point_energy_benchmark, synthetic_problem, VqeError, BENCH_SEED};
use qvirt::{
    hardware_efficient_ansatz, parse_qasm, vqe_minimize, wait_all, Circuit, Cluster, ClusterError,
    EnsembleJob, ExecutorPool, JobTable, LocalCluster, PauliOperator, PoolConfig, PoolError,
    Simulator, VqeParams, WorkerConfig, WorkerDaemon,
};
use serde::Serialize;

use crate::config::CliConfig;
use crate::spawn::{ChildWorkers, READY};
use crate::CliError;

fn cluster_error(e: ClusterError) -> CliError {
    match e {
        ClusterError::WorkerFailed { .. } => CliError::Transport(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

fn pool_error(e: PoolError) -> CliError {
    match e {
        PoolError::Exhausted | PoolError::Timeout { .. } | PoolError::Closed => {
            CliError::Transport(e.to_string())
        }
        _ => CliError::Config(e.to_string()),
    }
}

fn vqe_error(e: VqeError) -> CliError {
    match e {
        VqeError::Cluster(c) => cluster_error(c),
        VqeError::Aborted { source, .. } => vqe_error(*source),
        VqeError::Observable(_) | VqeError::Circuit(_) => CliError::Numerical(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

/// Reads OpenQASM (`.qasm` or anything that parses as it) or circuit JSON.
pub fn load_circuit(path: &Path) -> Result<Circuit, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        Circuit::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        parse_qasm(&text).map_err(|e| CliError::Config(format!("{}:{e}", path.display())))
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn wants_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn mode(config: &CliConfig) -> Mode {
    match config.shots {
        Some(shots) => Mode::Shots {
            shots,
            seed: config.seed,
        },
        None => Mode::Exact,
    }
}

/// Workers for scatter/gather commands: the configured endpoints, or
/// in-process daemons when none are given.
enum Backend {
    Remote(Cluster),
    Local(LocalCluster),
}

impl Backend {
    fn new(config: &CliConfig, default_workers: usize) -> Result<Self, CliError> {
        if config.endpoints.is_empty() {
            let n = config.workers.unwrap_or(default_workers);
            LocalCluster::spawn(n, WorkerConfig::default())
                .map(Backend::Local)
                .map_err(|e| CliError::Transport(format!("cannot start local workers: {e}")))
        } else {
            Cluster::new(config.endpoints.iter().map(String::as_str))
                .map(Backend::Remote)
                .map_err(cluster_error)
        }
    }

    fn cluster(&self) -> &Cluster {
        match self {
            Backend::Remote(c) => c,
            Backend::Local(l) => l.cluster(),
        }
    }
}

pub fn worker(host: &str, port: u16, max_qubits: usize, threads: usize, id: Option<String>) -> Result<(), CliError> {
    let config = WorkerConfig {
        worker_id: id.unwrap_or_else(|| format!("worker-{port}")),
        max_qubits,
        threads: threads.max(1),
        ..WorkerConfig::default()
    };
    let daemon = WorkerDaemon::bind((host, port), config)
        .map_err(|e| CliError::Transport(format!("cannot bind {host}:{port}: {e}")))?;
    let addr = daemon.local_addr().map_err(|e| CliError::Transport(e.to_string()))?;
    let mut out = std::io::stdout();
    let _ = writeln!(out, "qvirt worker {READY}{addr}");
    let _ = out.flush();
    daemon.serve().map_err(|e| CliError::Transport(e.to_string()))
}

fn bind_theta(circuit: Circuit, theta: &[f64]) -> Result<Circuit, CliError> {
    if circuit.is_literal() && theta.is_empty() {
        return Ok(circuit);
    }
    circuit
        .bind_parameters(theta)
        .map_err(|e| CliError::Config(format!("--theta: {e}")))
}

pub fn run(config: &CliConfig, path: &Path, theta: &[f64]) -> Result<(), CliError> {
    let mut circuit = bind_theta(load_circuit(path)?, theta)?;
    if !circuit.is_measured() {
        circuit.measure_all().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let outcome = if config.endpoints.is_empty() {
        let sim = Simulator::default();
        match config.shots {
            Some(shots) => sim.run(&circuit, shots, config.seed).map(|r| Outcome::Counts {
                counts: r.counts,
                shots: r.shots,
            }),
            None => sim.exact_parity(&circuit).map(|v| Outcome::Expectations { expectations: vec![v] }),
        }
        .map_err(|e| CliError::Numerical(e.to_string()))?
    } else {
        let cluster = Cluster::new(config.endpoints.iter().map(String::as_str)).map_err(cluster_error)?;
        let job = EnsembleJob {
            circuits: vec![circuit],
            mode: mode(config),
            n_virtual_qpus: 1,
        };
        cluster.scatter_execute(&job).map_err(cluster_error)?.results.remove(0)
    };

    let json = serde_json::to_value(&outcome).expect("serializable");
    if let Some(out) = &config.output {
        let text = if wants_json(out) {
            to_json(&json)
        } else {
            match &outcome {
                Outcome::Counts { counts, .. } => {
                    let mut s = String::from("bitstring,count\n");
                    for (k, v) in counts {
                        let _ = writeln!(s, "{k},{v}");
                    }
                    s
                }
                Outcome::Expectations { expectations } => format!("parity\n{:?}\n", expectations[0]),
            }
        };
        write_output(out, &text)?;
    }
    if config.json {
        print!("{}", to_json(&json));
    } else {
        match &outcome {
            Outcome::Counts { counts, shots } => {
                println!("{:<12} {:>10} {:>10}", "bitstring", "count", "prob");
                for (k, v) in counts {
                    println!("{k:<12} {v:>10} {:>10.4}", *v as f64 / *shots as f64);
                }
            }
            Outcome::Expectations { expectations } => println!("parity = {:.12}", expectations[0]),
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScanRow {
    index: usize,
    theta: f64,
    status: JobState,
    endpoint: String,
    counts: Option<BTreeMap<String, u64>>,
    error: Option<String>,
}

fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("index,theta,status,endpoint,counts,error\n");
    for r in rows {
        let counts = r
            .counts
            .as_ref()
            .map(|c| c.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        let error = r.error.as_deref().unwrap_or("").replace(['"', '\n'], "'");
        let _ = writeln!(s, "{},{:?},{},{},{counts},\"{error}\"", r.index, r.theta, r.status, r.endpoint);
    }
    s
}

pub fn scan(
    config: &CliConfig,
    path: &Path,
    points: usize,
    start: f64,
    stop: f64,
    timeout: f64,
) -> Result<(), CliError> {
    let circuit = load_circuit(path)?;
    if circuit.parameter_count() != 1 {
        return Err(CliError::Config(format!(
            "a scan varies exactly one parameter; {} has {}",
            path.display(),
            circuit.parameter_count()
        )));
    }
    if points == 0 {
        return Err(CliError::Config("--points must be positive".into()));
    }
    let Some(shots) = config.shots else {
        return Err(CliError::Config("scan samples counts; --exact is not supported".into()));
    };
    let mut circuit = circuit;
    if !circuit.is_measured() {
        circuit.measure_all().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let thetas = linspace(start, stop, points);
    let table = JobTable::scan(
        circuit,
        &thetas.iter().map(|t| vec![*t]).collect::<Vec<_>>(),
        shots,
        config.seed,
    );

    let local;
    let addresses: Vec<String> = if config.endpoints.is_empty() {
        local = LocalCluster::spawn(config.workers.unwrap_or(4), WorkerConfig::default())
            .map_err(|e| CliError::Transport(format!("cannot start local workers: {e}")))?;
        local.addresses().iter().map(|a| a.to_string()).collect()
    } else {
        config.endpoints.clone()
    };
    let pool_config = PoolConfig {
        connect_timeout: Duration::from_secs(2),
        ..PoolConfig::default()
    };
    let pool = ExecutorPool::from_addresses(&addresses, pool_config).map_err(pool_error)?;

    let mut handles = Vec::with_capacity(points);
    let mut rows = Vec::with_capacity(points);
    for (j, &theta) in thetas.iter().enumerate() {
        match pool.run_async(&table, 0, j) {
            Ok(h) => handles.push((j, h)),
            Err(e) => rows.push(ScanRow {
                index: j,
                theta,
                status: JobState::Failed,
                endpoint: String::new(),
                counts: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let hs: Vec<_> = handles.iter().map(|(_, h)| h.clone()).collect();
    let timed_out = wait_all(&hs, Duration::from_secs_f64(timeout.max(0.0))).is_err();
    for (j, h) in handles {
        rows.push(ScanRow {
            index: j,
            theta: thetas[j],
            status: h.state(),
            endpoint: h.endpoint().address().to_string(),
            counts: h.result().map(|r| r.counts),
            error: h.error().or_else(|| (!h.is_terminal()).then(|| "timed out".to_string())),
        });
    }
    rows.sort_by_key(|r| r.index);

    if let Some(out) = &config.output {
        let text = if wants_json(out) { to_json(&rows) } else { scan_csv(&rows) };
        write_output(out, &text)?;
    }
    if config.json {
        print!("{}", to_json(&rows));
    } else {
        print!("{}", scan_csv(&rows));
    }
    let failed = rows.iter().filter(|r| r.status != JobState::Complete).count();
    if failed > 0 {
        let why = if timed_out { " (timed out)" } else { "" };
        return Err(CliError::Transport(format!("{failed} of {points} scan points failed{why}")));
    }
    Ok(())
}

fn load_ansatz(spec: &str, num_qubits: usize) -> Result<Circuit, CliError> {
    if let Some(depth) = spec.strip_prefix("hea:") {
        let depth: usize = depth
            .parse()
            .ok()
            .filter(|d| *d > 0)
            .ok_or_else(|| CliError::Config(format!("bad ansatz depth in {spec:?}")))?;
        Ok(hardware_efficient_ansatz(num_qubits, depth))
    } else {
        load_circuit(Path::new(spec))
    }
}

pub fn vqe(
    config: &CliConfig,
    hamiltonian: &Path,
    ansatz: &str,
    max_iters: usize,
    ftol: f64,
    theta0: Vec<f64>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(hamiltonian)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", hamiltonian.display())))?;
    let h = PauliOperator::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", hamiltonian.display())))?;
    let ansatz = load_ansatz(ansatz, h.num_qubits())?;
    if max_iters == 0 {
        return Err(CliError::Config("--max-iters must be positive".into()));
    }
    let mut params = VqeParams::new(ansatz, h);
    if !theta0.is_empty() {
        params.theta0 = theta0;
    }
    params.max_iters = max_iters;
    params.ftol = ftol;
    params.mode = mode(config);
    params.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let default_workers = if config.endpoints.is_empty() { 1 } else { config.endpoints.len() };
    let backend = Backend::new(config, default_workers)?;
    params.n_virtual_qpus = config.workers.unwrap_or(default_workers);
    let result = vqe_minimize(&params, backend.cluster()).map_err(vqe_error)?;
    if !result.opt_val.is_finite() {
        return Err(CliError::Numerical(format!("energy diverged to {}", result.opt_val)));
    }

    if let Some(out) = &config.output {
        let text = if wants_json(out) {
            to_json(&result)
        } else {
            let mut s = String::from("evaluation,energy\n");
            for (i, e) in result.energies.iter().enumerate() {
                let _ = writeln!(s, "{i},{e:?}");
            }
            s
        };
        write_output(out, &text)?;
    }
    if config.json {
        print!("{}", to_json(&result));
    } else {
        println!("opt_val     {:.10}", result.opt_val);
        println!("opt_params  {:?}", result.opt_params);
        println!("evaluations {} (converged: {})", result.evaluations, result.converged);
        println!(
            "wall {:.3}s, execution {:.3}s",
            result.timing.wall_seconds, result.timing.execution_seconds
        );
    }
    Ok(())
}

pub fn bench(config: &CliConfig, qubits: usize, terms: usize, counts: &[usize], depth: usize) -> Result<(), CliError> {
    if qubits == 0 || qubits > qvirt::sim::DEFAULT_MAX_QUBITS {
        return Err(CliError::Config(format!(
            "--qubits must lie in 1..={}",
            qvirt::sim::DEFAULT_MAX_QUBITS
        )));
    }
    if terms == 0 {
        return Err(CliError::Config("empty ensemble: --terms must be positive".into()));
    }
    let distinct = 4f64.powi(qubits as i32) - 1.0;
    if terms as f64 > distinct {
        return Err(CliError::Config(format!("{qubits} qubits admit only {distinct} distinct terms")));
    }
    if depth == 0 {
        return Err(CliError::Config("--depth must be positive".into()));
    }
    if counts.is_empty() || counts.contains(&0) {
        return Err(CliError::Config("--workers must list positive counts".into()));
    }
    let needed = *counts.iter().max().expect("non-empty");

    let mut params = synthetic_problem(qubits, terms, depth, BENCH_SEED.wrapping_add(config.seed));
    params.mode = mode(config);

    let children;
    let cluster = if config.endpoints.is_empty() {
        children = ChildWorkers::spawn(needed)?;
        Cluster::new(children.addresses().iter().map(String::as_str)).map_err(cluster_error)?
    } else {
        Cluster::new(config.endpoints.iter().map(String::as_str)).map_err(cluster_error)?
    };
    cluster.ping_all().map_err(cluster_error)?;
    let report = fixed_point_energy_benchmark(&params, counts, &cluster).map_err(vqe_error)?;

    if let Some(out) = &config.output {
        let text = if wants_json(out) { to_json(&report) } else { report.to_csv() };
        write_output(out, &text)?;
    }
    if config.json {
        print!("{}", to_json(&report));
    } else {
        println!("{qubits} qubits, {terms} terms, depth {depth}");
        println!(
            "{:>7} {:>10} {:>10} {:>10} {:>8}  {:<20} energy",
            "workers", "wall_s", "exec_s", "overhead", "speedup", "circuits/worker"
        );
        for r in &report.rows {
            let per: Vec<String> = r.circuits_per_worker.iter().map(|n| n.to_string()).collect();
            println!(
                "{:>7} {:>10.3} {:>10.3} {:>10.3} {:>8.2}  {:<20} {:.12}",
                r.workers,
                r.wall_s,
                r.exec_s,
                r.overhead_s,
                r.speedup,
                per.join("/"),
                r.energy
            );
        }
    }
    Ok(())
}
