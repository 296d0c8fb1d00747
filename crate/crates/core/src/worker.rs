//! Worker daemon: a statevector backend served over the wire protocol.
//!
//! Each connection is handled on its own thread and processes requests in
//! order. Within a batch, up to `threads` circuits run concurrently; results
//! are always returned in batch order.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::circuit::Circuit;
use crate::protocol::{self, ErrorCode, Outcome, Request, Response, PROTOCOL_VERSION};
use crate::sim::{SimError, Simulator, DEFAULT_MAX_QUBITS};

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    pub worker_id: String,
    pub max_qubits: usize,
    pub max_shots: u64,
    /// Circuits of one batch that may execute concurrently.
    pub threads: usize,
    /// Artificial latency added before every circuit (fault and latency tests).
    pub delay: Duration,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        WorkerConfig {
            worker_id: "worker".to_string(),
            max_qubits: DEFAULT_MAX_QUBITS,
            max_shots: 1 << 32,
            threads: 1,
            delay: Duration::ZERO,
        }
    }
}

#[derive(Default)]
struct Shared {
    stopping: AtomicBool,
    connections: Mutex<Vec<TcpStream>>,
}

pub struct WorkerDaemon {
    listener: TcpListener,
    config: Arc<WorkerConfig>,
    shared: Arc<Shared>,
}

/// Handle to a daemon running on a background thread.
pub struct WorkerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<()>>,
}

impl WorkerDaemon {
    pub fn bind<A: ToSocketAddrs>(addr: A, config: WorkerConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        Ok(WorkerDaemon {
            listener,
            config: Arc::new(config),
            shared: Arc::default(),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until a `shutdown` request arrives or the daemon is killed.
    pub fn serve(self) -> io::Result<()> {
        let addr = self.local_addr()?;
        info!("{} listening on {addr}", self.config.worker_id);
        for stream in self.listener.incoming() {
            if self.shared.stopping.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    warn!("accept failed: {e}");
                    continue;
                }
            };
            if let Ok(clone) = stream.try_clone() {
                self.shared.connections.lock().unwrap().push(clone);
            }
            let config = Arc::clone(&self.config);
            let shared = Arc::clone(&self.shared);
            thread::spawn(move || {
                if let Err(e) = handle_connection(stream, &config, &shared, addr) {
                    debug!("connection closed: {e}");
                }
            });
        }
        info!("{} stopped", self.config.worker_id);
        Ok(())
    }

    pub fn spawn(self) -> io::Result<WorkerHandle> {
        let addr = self.local_addr()?;
        let shared = Arc::clone(&self.shared);
        let thread = thread::Builder::new()
            .name(format!("{}-accept", self.config.worker_id))
            .spawn(move || {
                let _ = self.serve();
            })?;
        Ok(WorkerHandle {
            addr,
            shared,
            thread: Some(thread),
        })
    }
}

fn stop(shared: &Shared, addr: SocketAddr) {
    if shared.stopping.swap(true, Ordering::SeqCst) {
        return;
    }
    for conn in shared.connections.lock().unwrap().drain(..) {
        let _ = conn.shutdown(Shutdown::Both);
    }
    // Wake the accept loop.
    let _ = TcpStream::connect_timeout(&addr, Duration::from_millis(200));
}

impl WorkerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Abruptly closes every open connection and stops accepting.
    pub fn kill(&mut self) {
        stop(&self.shared, self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.shared.stopping.load(Ordering::SeqCst)
    }
}

impl Drop for WorkerHandle {
    fn drop(&mut self) {
        self.kill();
    }
}

fn handle_connection(
    stream: TcpStream,
    config: &WorkerConfig,
    shared: &Shared,
    addr: SocketAddr,
) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    while let Some(frame) = protocol::read_frame(&mut reader)? {
        if shared.stopping.load(Ordering::SeqCst) {
            break;
        }
        let request: Request = match serde_json::from_slice(&frame) {
            Ok(r) => r,
            Err(e) => {
                protocol::send(
                    &mut writer,
                    &Response::Error {
                        job_id: None,
                        code: ErrorCode::Malformed,
                        message: e.to_string(),
                    },
                )?;
                continue;
            }
        };
        let shutdown = matches!(request, Request::Shutdown);
        let response = respond(request, config);
        if shared.stopping.load(Ordering::SeqCst) {
            // Killed mid-request: drop the answer like a dead process would.
            break;
        }
        protocol::send(&mut writer, &response)?;
        if shutdown {
            stop(shared, addr);
            break;
        }
    }
    Ok(())
}

/// Computes the reply to one request. Pure apart from the configured delay.
pub fn respond(request: Request, config: &WorkerConfig) -> Response {
    match request {
        Request::Ping => Response::Pong {
            worker_id: config.worker_id.clone(),
            max_qubits: config.max_qubits,
            max_shots: config.max_shots,
            threads: config.threads,
            protocol: PROTOCOL_VERSION,
        },
        Request::Shutdown => Response::Bye,
        Request::Execute {
            job_id,
            circuit,
            shots,
            seed,
        } => {
            let start = Instant::now();
            match execute_one(&circuit, shots, seed, config) {
                Ok(outcome) => Response::Result {
                    job_id,
                    outcome,
                    execution_seconds: start.elapsed().as_secs_f64(),
                },
                Err((code, message)) => Response::Error {
                    job_id: Some(job_id),
                    code,
                    message,
                },
            }
        }
        Request::Batch {
            job_id,
            circuits,
            shots,
            seeds,
        } => {
            if seeds.len() != circuits.len() {
                return Response::Error {
                    job_id: Some(job_id),
                    code: ErrorCode::Malformed,
                    message: format!("{} circuits but {} seeds", circuits.len(), seeds.len()),
                };
            }
            let start = Instant::now();
            match execute_batch(&circuits, shots, &seeds, config) {
                Ok(results) => Response::BatchResult {
                    job_id,
                    results,
                    execution_seconds: start.elapsed().as_secs_f64(),
                },
                Err((index, code, message)) => Response::Error {
                    job_id: Some(job_id),
                    code,
                    message: format!("circuit {index}: {message}"),
                },
            }
        }
    }
}

fn execute_one(
    circuit: &Circuit,
    shots: Option<u64>,
    seed: u64,
    config: &WorkerConfig,
) -> Result<Outcome, (ErrorCode, String)> {
    if circuit.num_qubits() > config.max_qubits {
        return Err((
            ErrorCode::Capability,
            format!(
                "{} qubits exceeds worker capability of {}",
                circuit.num_qubits(),
                config.max_qubits
            ),
        ));
    }
    if let Some(s) = shots {
        if s > config.max_shots {
            return Err((
                ErrorCode::Capability,
                format!("{s} shots exceeds worker capability of {}", config.max_shots),
            ));
        }
    }
    if !circuit.is_measured() {
        return Err((ErrorCode::InvalidCircuit, SimError::NoMeasurements.to_string()));
    }
    if !config.delay.is_zero() {
        thread::sleep(config.delay);
    }
    let sim = Simulator::new(config.max_qubits);
    let classify = |e: SimError| {
        let code = match e {
            SimError::Circuit(_) | SimError::NoMeasurements | SimError::ZeroShots => {
                ErrorCode::InvalidCircuit
            }
            _ => ErrorCode::Backend,
        };
        (code, e.to_string())
    };
    match shots {
        None => sim
            .exact_parity(circuit)
            .map(|v| Outcome::Expectations {
                expectations: vec![v],
            })
            .map_err(classify),
        Some(shots) => sim
            .run(circuit, shots, seed)
            .map(|r| Outcome::Counts {
                counts: r.counts,
                shots: r.shots,
            })
            .map_err(classify),
    }
}

type BatchError = (usize, ErrorCode, String);

fn execute_batch(
    circuits: &[Circuit],
    shots: Option<u64>,
    seeds: &[u64],
    config: &WorkerConfig,
) -> Result<Vec<Outcome>, BatchError> {
    let threads = config.threads.clamp(1, circuits.len().max(1));
    if threads == 1 {
        return circuits
            .iter()
            .zip(seeds)
            .enumerate()
            .map(|(i, (c, &s))| execute_one(c, shots, s, config).map_err(|(code, m)| (i, code, m)))
            .collect();
    }
    let next = AtomicUsize::new(0);
    type Slot = Mutex<Option<Result<Outcome, (ErrorCode, String)>>>;
    let slots: Vec<Slot> =
        circuits.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= circuits.len() {
                    break;
                }
                let r = execute_one(&circuits[i], shots, seeds[i], config);
                let failed = r.is_err();
                *slots[i].lock().unwrap() = Some(r);
                if failed {
                    next.store(circuits.len(), Ordering::Relaxed);
                }
            });
        }
    });
    let mut out = Vec::with_capacity(circuits.len());
    for (i, slot) in slots.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(Ok(o)) => out.push(o),
            Some(Err((code, m))) => return Err((i, code, m)),
            None => {
                // Skipped after an earlier failure; report that failure instead.
                continue;
            }
        }
    }
    if out.len() != circuits.len() {
        return Err((out.len(), ErrorCode::Backend, "batch aborted".into()));
    }
    Ok(out)
}
