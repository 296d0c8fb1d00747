//! Asynchronous offload to a pool of remote workers.
//!
//! [`ExecutorPool::async_execute`] only validates the job and enqueues it on
//! the endpoint's queue; background lane threads own the connections and
//! drive each [`JobHandle`] through `queued → sent → running → complete|failed`.
//! Failures surface on the handle and are never retried.

use std::fmt;
use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};
use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::protocol::{self, Outcome, Request, Response};
use crate::sim::{CountsResult, DEFAULT_MAX_QUBITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("an executor pool needs at least one endpoint")]
    NoEndpoints,
    #[error("cannot resolve endpoint address {0}")]
    Address(String),
    #[error("all endpoints are unhealthy")]
    Exhausted,
    #[error("invalid circuit: {0}")]
    Circuit(#[from] CircuitError),
    #[error("circuit has no measurements")]
    Unmeasured,
    #[error("{num_qubits} qubits exceeds endpoint capability of {max_qubits}")]
    TooManyQubits { num_qubits: usize, max_qubits: usize },
    #[error("{shots} shots outside endpoint capability of 1..={max_shots}")]
    Shots { shots: u64, max_shots: u64 },
    #[error("cell ({row}, {column}) outside a {rows}x{columns} job table")]
    CellOutOfRange {
        row: usize,
        column: usize,
        rows: usize,
        columns: usize,
    },
    #[error("epsilon must lie in (0, 1], got {0}")]
    Epsilon(f64),
    #[error("timed out with {} unfinished job(s): {pending:?}", pending.len())]
    Timeout { pending: Vec<u64> },
    #[error("the pool has been shut down")]
    Closed,
}

/// `⌈1/ε²⌉` shots give a statistical precision of about `ε`.
pub fn shots_for_precision(epsilon: f64) -> Result<u64, PoolError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(PoolError::Epsilon(epsilon));
    }
    let exact = 1.0 / (epsilon * epsilon);
    // Absorb rounding in 1/ε² so that ε = 10⁻³ gives exactly 10⁶.
    let rounded = exact.round();
    let shots = if (exact - rounded).abs() <= 1e-9 * rounded {
        rounded
    } else {
        exact.ceil()
    };
    Ok(shots as u64)
}

#[derive(Debug)]
struct EndpointState {
    address: SocketAddr,
    label: String,
    healthy: AtomicBool,
    last_checked: Mutex<Option<Instant>>,
    max_qubits: AtomicUsize,
    max_shots: AtomicU64,
    dispatched: AtomicUsize,
}

/// An addressable worker in the pool. Cloning shares the live health state.
#[derive(Clone)]
pub struct WorkerEndpoint(Arc<EndpointState>);

impl fmt::Debug for WorkerEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WorkerEndpoint")
            .field("address", &self.0.label)
            .field("healthy", &self.is_healthy())
            .finish()
    }
}

impl PartialEq for WorkerEndpoint {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl WorkerEndpoint {
    pub fn new(address: &str) -> Result<Self, PoolError> {
        let resolved = address
            .to_socket_addrs()
            .ok()
            .and_then(|mut it| it.next())
            .ok_or_else(|| PoolError::Address(address.to_string()))?;
        Ok(WorkerEndpoint(Arc::new(EndpointState {
            address: resolved,
            label: address.to_string(),
            healthy: AtomicBool::new(true),
            last_checked: Mutex::new(None),
            max_qubits: AtomicUsize::new(DEFAULT_MAX_QUBITS),
            max_shots: AtomicU64::new(1 << 32),
            dispatched: AtomicUsize::new(0),
        })))
    }

    pub fn with_capabilities(self, max_qubits: usize, max_shots: u64) -> Self {
        self.0.max_qubits.store(max_qubits, Ordering::SeqCst);
        self.0.max_shots.store(max_shots, Ordering::SeqCst);
        self
    }

    pub fn address(&self) -> &str {
        &self.0.label
    }

    pub fn socket_addr(&self) -> SocketAddr {
        self.0.address
    }

    pub fn is_healthy(&self) -> bool {
        self.0.healthy.load(Ordering::SeqCst)
    }

    pub fn set_healthy(&self, healthy: bool) {
        self.0.healthy.store(healthy, Ordering::SeqCst);
        *self.0.last_checked.lock().unwrap() = Some(Instant::now());
    }

    pub fn last_checked(&self) -> Option<Instant> {
        *self.0.last_checked.lock().unwrap()
    }

    pub fn max_qubits(&self) -> usize {
        self.0.max_qubits.load(Ordering::SeqCst)
    }

    pub fn max_shots(&self) -> u64 {
        self.0.max_shots.load(Ordering::SeqCst)
    }

    /// Jobs submitted to this endpoint so far.
    pub fn dispatched(&self) -> usize {
        self.0.dispatched.load(Ordering::SeqCst)
    }

    /// Pings the worker, refreshing health and capabilities.
    pub fn check_health(&self, timeout: Duration) -> bool {
        let ok = match ping(self.0.address, timeout) {
            Ok(Response::Pong {
                max_qubits,
                max_shots,
                ..
            }) => {
                self.0.max_qubits.store(max_qubits, Ordering::SeqCst);
                self.0.max_shots.store(max_shots, Ordering::SeqCst);
                true
            }
            Ok(_) | Err(_) => false,
        };
        self.set_healthy(ok);
        ok
    }
}

fn ping(addr: SocketAddr, timeout: Duration) -> io::Result<Response> {
    let stream = TcpStream::connect_timeout(&addr, timeout)?;
    stream.set_read_timeout(Some(timeout))?;
    protocol::send(&mut BufWriter::new(stream.try_clone()?), &Request::Ping)?;
    protocol::recv(&mut BufReader::new(stream))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Sent,
    Running,
    Complete,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Complete | JobState::Failed)
    }

    /// Legal lifecycle steps: strictly forward, `complete` only from
    /// `running`, and nothing out of a terminal state.
    pub fn can_advance_to(self, next: JobState) -> bool {
        !self.is_terminal()
            && next > self
            && (next != JobState::Complete || self == JobState::Running)
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            JobState::Queued => "queued",
            JobState::Sent => "sent",
            JobState::Running => "running",
            JobState::Complete => "complete",
            JobState::Failed => "failed",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
struct JobRecord {
    state: JobState,
    result: Option<CountsResult>,
    error: Option<String>,
    completed_at: Option<Instant>,
    transitions: Vec<JobState>,
}

struct JobInner {
    id: u64,
    endpoint: WorkerEndpoint,
    submitted_at: Instant,
    record: Mutex<JobRecord>,
    changed: Condvar,
}

/// Observation handle for one offloaded circuit.
#[derive(Clone)]
pub struct JobHandle(Arc<JobInner>);

impl fmt::Debug for JobHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JobHandle")
            .field("id", &self.0.id)
            .field("endpoint", &self.0.endpoint.address())
            .field("state", &self.state())
            .finish()
    }
}

impl JobHandle {
    fn new(id: u64, endpoint: WorkerEndpoint) -> Self {
        JobHandle(Arc::new(JobInner {
            id,
            endpoint,
            submitted_at: Instant::now(),
            record: Mutex::new(JobRecord {
                state: JobState::Queued,
                result: None,
                error: None,
                completed_at: None,
                transitions: vec![JobState::Queued],
            }),
            changed: Condvar::new(),
        }))
    }

    pub fn job_id(&self) -> u64 {
        self.0.id
    }

    pub fn endpoint(&self) -> &WorkerEndpoint {
        &self.0.endpoint
    }

    pub fn state(&self) -> JobState {
        self.0.record.lock().unwrap().state
    }

    pub fn complete(&self) -> bool {
        self.state() == JobState::Complete
    }

    pub fn is_terminal(&self) -> bool {
        self.state().is_terminal()
    }

    pub fn result(&self) -> Option<CountsResult> {
        self.0.record.lock().unwrap().result.clone()
    }

    pub fn error(&self) -> Option<String> {
        self.0.record.lock().unwrap().error.clone()
    }

    pub fn submitted_at(&self) -> Instant {
        self.0.submitted_at
    }

    pub fn completed_at(&self) -> Option<Instant> {
        self.0.record.lock().unwrap().completed_at
    }

    /// Every state the job has been in, oldest first.
    pub fn transitions(&self) -> Vec<JobState> {
        self.0.record.lock().unwrap().transitions.clone()
    }

    /// Blocks until the job is terminal or `timeout` elapses.
    pub fn wait(&self, timeout: Duration) -> JobState {
        let deadline = Instant::now() + timeout;
        let mut record = self.0.record.lock().unwrap();
        while !record.state.is_terminal() {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            record = self.0.changed.wait_timeout(record, deadline - now).unwrap().0;
        }
        record.state
    }

    fn advance(&self, next: JobState) {
        let mut record = self.0.record.lock().unwrap();
        if !record.state.can_advance_to(next) {
            warn!("job {}: ignoring illegal transition {} -> {next}", self.0.id, record.state);
            return;
        }
        record.state = next;
        record.transitions.push(next);
        drop(record);
        self.0.changed.notify_all();
    }

    fn finish(&self, outcome: Result<CountsResult, String>) {
        let mut record = self.0.record.lock().unwrap();
        let next = if outcome.is_ok() {
            JobState::Complete
        } else {
            JobState::Failed
        };
        if !record.state.can_advance_to(next) {
            warn!("job {}: ignoring illegal transition {} -> {next}", self.0.id, record.state);
            return;
        }
        match outcome {
            Ok(r) => record.result = Some(r),
            Err(e) => record.error = Some(e),
        }
        record.state = next;
        record.transitions.push(next);
        record.completed_at = Some(Instant::now());
        drop(record);
        self.0.changed.notify_all();
    }
}

/// Blocks until every handle is terminal. On timeout the error lists the
/// unfinished job ids; the handles keep whatever results arrived.
pub fn wait_all(handles: &[JobHandle], timeout: Duration) -> Result<Vec<JobState>, PoolError> {
    let deadline = Instant::now() + timeout;
    for h in handles {
        h.wait(deadline.saturating_duration_since(Instant::now()));
    }
    let states: Vec<JobState> = handles.iter().map(JobHandle::state).collect();
    let pending: Vec<u64> = handles
        .iter()
        .zip(&states)
        .filter(|(_, s)| !s.is_terminal())
        .map(|(h, _)| h.job_id())
        .collect();
    if pending.is_empty() {
        Ok(states)
    } else {
        Err(PoolError::Timeout { pending })
    }
}

#[derive(Debug, Clone)]
pub struct PoolConfig {
    /// Period of the active health ping.
    pub health_interval: Duration,
    pub connect_timeout: Duration,
    /// Reply timeout for one job; `None` waits indefinitely.
    pub request_timeout: Option<Duration>,
    /// Concurrent connections (and in-flight jobs) per endpoint.
    pub lanes_per_endpoint: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            health_interval: Duration::from_secs(5),
            connect_timeout: Duration::from_secs(2),
            request_timeout: Some(Duration::from_secs(600)),
            lanes_per_endpoint: 1,
        }
    }
}

struct QueuedJob {
    handle: JobHandle,
    circuit: Circuit,
    shots: u64,
    seed: u64,
}

struct Lane {
    endpoint: WorkerEndpoint,
    sender: Sender<QueuedJob>,
}

/// Round-robin pool of remote workers.
pub struct ExecutorPool {
    lanes: Vec<Lane>,
    cursor: AtomicUsize,
    next_id: AtomicU64,
    config: PoolConfig,
    threads: Vec<JoinHandle<()>>,
    stop: Option<Sender<()>>,
}

impl ExecutorPool {
    /// Starts lane threads for every endpoint and schedules health checks.
    /// No network traffic happens here.
    pub fn initialize(endpoints: Vec<WorkerEndpoint>, config: PoolConfig) -> Result<Self, PoolError> {
        if endpoints.is_empty() {
            return Err(PoolError::NoEndpoints);
        }
        let mut threads = Vec::new();
        let mut lanes = Vec::new();
        for endpoint in &endpoints {
            let (tx, rx) = unbounded::<QueuedJob>();
            for lane in 0..config.lanes_per_endpoint.max(1) {
                let rx = rx.clone();
                let ep = endpoint.clone();
                let cfg = config.clone();
                threads.push(
                    thread::Builder::new()
                        .name(format!("lane-{}-{lane}", ep.address()))
                        .spawn(move || run_lane(ep, rx, cfg))
                        .expect("spawn lane thread"),
                );
            }
            lanes.push(Lane {
                endpoint: endpoint.clone(),
                sender: tx,
            });
        }
        let (stop_tx, stop_rx) = unbounded::<()>();
        let interval = config.health_interval;
        let timeout = config.connect_timeout;
        threads.push(
            thread::Builder::new()
                .name("pool-health".into())
                .spawn(move || {
                    while let Err(RecvTimeoutError::Timeout) = stop_rx.recv_timeout(interval) {
                        for ep in &endpoints {
                            let ok = ep.check_health(timeout);
                            debug!("health {}: {ok}", ep.address());
                        }
                    }
                })
                .expect("spawn health thread"),
        );
        Ok(ExecutorPool {
            lanes,
            cursor: AtomicUsize::new(0),
            next_id: AtomicU64::new(0),
            config,
            threads,
            stop: Some(stop_tx),
        })
    }

    /// Convenience: endpoints from `host:port` strings.
    pub fn from_addresses<S: AsRef<str>>(addresses: &[S], config: PoolConfig) -> Result<Self, PoolError> {
        let endpoints = addresses
            .iter()
            .map(|a| WorkerEndpoint::new(a.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::initialize(endpoints, config)
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    pub fn endpoints(&self) -> Vec<WorkerEndpoint> {
        self.lanes.iter().map(|l| l.endpoint.clone()).collect()
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    /// Pings every endpoint now, outside the periodic schedule.
    pub fn check_health(&self) {
        for lane in &self.lanes {
            lane.endpoint.check_health(self.config.connect_timeout);
        }
    }

    /// Next healthy endpoint in cyclic order. Each call advances the shared
    /// cursor, so concurrent callers see distinct positions.
    pub fn get_next_available_qpu(&self) -> Result<WorkerEndpoint, PoolError> {
        self.next_lane().map(|i| self.lanes[i].endpoint.clone())
    }

    fn next_lane(&self) -> Result<usize, PoolError> {
        let n = self.lanes.len();
        for _ in 0..n {
            let i = self.cursor.fetch_add(1, Ordering::SeqCst) % n;
            if self.lanes[i].endpoint.is_healthy() {
                return Ok(i);
            }
        }
        Err(PoolError::Exhausted)
    }

    /// Validates and enqueues one job, returning before any network I/O.
    pub fn async_execute(
        &self,
        endpoint: &WorkerEndpoint,
        circuit: Circuit,
        shots: u64,
        seed: u64,
    ) -> Result<JobHandle, PoolError> {
        if let Some(g) = circuit.gates().iter().find(|g| g.literal_angle().is_err()) {
            g.literal_angle()?;
        }
        if !circuit.is_measured() {
            return Err(PoolError::Unmeasured);
        }
        if circuit.num_qubits() > endpoint.max_qubits() {
            return Err(PoolError::TooManyQubits {
                num_qubits: circuit.num_qubits(),
                max_qubits: endpoint.max_qubits(),
            });
        }
        if shots == 0 || shots > endpoint.max_shots() {
            return Err(PoolError::Shots {
                shots,
                max_shots: endpoint.max_shots(),
            });
        }
        let lane = self
            .lanes
            .iter()
            .find(|l| l.endpoint == *endpoint)
            .ok_or_else(|| PoolError::Address(endpoint.address().to_string()))?;
        let handle = JobHandle::new(self.next_id.fetch_add(1, Ordering::SeqCst), endpoint.clone());
        endpoint.0.dispatched.fetch_add(1, Ordering::SeqCst);
        lane.sender
            .send(QueuedJob {
                handle: handle.clone(),
                circuit,
                shots,
                seed,
            })
            .map_err(|_| PoolError::Closed)?;
        Ok(handle)
    }

    /// Binds cell `(row, column)` of the table, picks the next endpoint and
    /// submits without blocking.
    pub fn run_async(&self, table: &JobTable, row: usize, column: usize) -> Result<JobHandle, PoolError> {
        let cell = table.cell(row, column)?;
        let endpoint = self.get_next_available_qpu()?;
        self.async_execute(&endpoint, cell.circuit, cell.shots, cell.seed)
    }
}

impl Drop for ExecutorPool {
    fn drop(&mut self) {
        self.stop.take();
        self.lanes.clear();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn run_lane(endpoint: WorkerEndpoint, jobs: Receiver<QueuedJob>, config: PoolConfig) {
    let mut connection: Option<(BufReader<TcpStream>, BufWriter<TcpStream>)> = None;
    for job in jobs {
        let outcome = execute_remote(&endpoint, &job, &config, &mut connection);
        if outcome.is_err() {
            connection = None;
        }
        job.handle.finish(outcome);
    }
}

fn execute_remote(
    endpoint: &WorkerEndpoint,
    job: &QueuedJob,
    config: &PoolConfig,
    connection: &mut Option<(BufReader<TcpStream>, BufWriter<TcpStream>)>,
) -> Result<CountsResult, String> {
    let transport = |e: io::Error| {
        endpoint.set_healthy(false);
        format!("transport error talking to {}: {e}", endpoint.address())
    };
    if connection.is_none() {
        let stream =
            TcpStream::connect_timeout(&endpoint.socket_addr(), config.connect_timeout).map_err(transport)?;
        stream.set_nodelay(true).map_err(transport)?;
        stream.set_read_timeout(config.request_timeout).map_err(transport)?;
        let reader = BufReader::new(stream.try_clone().map_err(transport)?);
        *connection = Some((reader, BufWriter::new(stream)));
    }
    let (reader, writer) = connection.as_mut().expect("connected above");
    let request = Request::Execute {
        job_id: job.handle.job_id(),
        circuit: job.circuit.clone(),
        shots: Some(job.shots),
        seed: job.seed,
    };
    protocol::send(writer, &request).map_err(transport)?;
    job.handle.advance(JobState::Sent);
    job.handle.advance(JobState::Running);
    match protocol::recv(reader).map_err(transport)? {
        Response::Result {
            outcome: Outcome::Counts { counts, shots },
            execution_seconds,
            ..
        } => Ok(CountsResult {
            counts,
            shots,
            execution_time: execution_seconds,
        }),
        Response::Error { code, message, .. } => Err(format!("{code:?}: {message}")),
        other => Err(format!("unexpected reply {other:?}")),
    }
}

/// Execution settings of one table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub shots: u64,
    pub seed: u64,
    pub theta: Vec<f64>,
}

/// A fully resolved table cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub circuit: Circuit,
    pub shots: u64,
    pub seed: u64,
}

/// Rows are circuits, columns are run configurations.
#[derive(Debug, Clone, Default)]
pub struct JobTable {
    pub rows: Vec<Circuit>,
    pub columns: Vec<RunConfig>,
}

impl JobTable {
    pub fn new(rows: Vec<Circuit>, columns: Vec<RunConfig>) -> Self {
        JobTable { rows, columns }
    }

    /// Single-row parameter scan; column `j` binds `thetas[j]` and uses seed
    /// `seed + j`.
    pub fn scan(circuit: Circuit, thetas: &[Vec<f64>], shots: u64, seed: u64) -> Self {
        let columns = thetas
            .iter()
            .enumerate()
            .map(|(j, theta)| RunConfig {
                shots,
                seed: seed.wrapping_add(j as u64),
                theta: theta.clone(),
            })
            .collect();
        JobTable {
            rows: vec![circuit],
            columns,
        }
    }

    /// `rows[row]` bound to `columns[column].theta`; the seed is the column
    /// seed offset by the row index.
    pub fn cell(&self, row: usize, column: usize) -> Result<Cell, PoolError> {
        let out_of_range = || PoolError::CellOutOfRange {
            row,
            column,
            rows: self.rows.len(),
            columns: self.columns.len(),
        };
        let circuit = self.rows.get(row).ok_or_else(out_of_range)?;
        let config = self.columns.get(column).ok_or_else(out_of_range)?;
        Ok(Cell {
            circuit: circuit.bind_parameters(&config.theta)?,
            shots: config.shots,
            seed: config.seed.wrapping_add(row as u64),
        })
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { stop } else { start + step * i as f64 })
                .collect()
        }
    }
}
