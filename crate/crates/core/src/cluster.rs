//! Coordinator side of the scatter/gather runtime.
//!
//! An ensemble of circuits is split into contiguous, balanced partitions, one
//! per virtual QPU. All batches are sent concurrently; the coordinator waits
//! for every reply (gather barrier) and reassembles results in submission
//! order. Any failed batch fails the whole ensemble.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::ops::Range;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::observable::{circuit_seed, Mode};
use crate::protocol::{self, Outcome, Request, Response};
use crate::worker::{WorkerConfig, WorkerDaemon, WorkerHandle};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("at least one virtual QPU is required")]
    NoWorkers,
    #[error("{requested} virtual QPUs requested but only {available} workers are registered")]
    NotEnoughWorkers { requested: usize, available: usize },
    #[error("worker {worker} ({address}) failed: {message}")]
    WorkerFailed {
        worker: usize,
        address: String,
        message: String,
        /// Results gathered from the batches that did succeed.
        partial: Vec<Option<Outcome>>,
    },
    #[error("cannot resolve worker address {0}")]
    Address(String),
}

/// `k` contiguous ranges covering `0..n` whose sizes differ by at most one;
/// the first `n % k` ranges carry the extra element.
pub fn partition(n: usize, k: usize) -> Result<Vec<Range<usize>>, ClusterError> {
    if k == 0 {
        return Err(ClusterError::NoWorkers);
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct EnsembleJob {
    pub circuits: Vec<Circuit>,
    pub mode: Mode,
    pub n_virtual_qpus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTiming {
    /// Worker-reported execution time of each batch.
    pub execution_seconds: Vec<f64>,
    /// Wall time of the whole call minus the slowest worker's execution.
    pub pre_post_seconds: f64,
    pub wall_seconds: f64,
}

impl EnsembleTiming {
    pub fn max_execution(&self) -> f64 {
        self.execution_seconds.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// One outcome per circuit, in submission order.
    pub results: Vec<Outcome>,
    pub timing: EnsembleTiming,
    pub circuits_per_worker: Vec<usize>,
}

impl EnsembleResult {
    pub fn parities(&self) -> Vec<f64> {
        self.results.iter().map(Outcome::parity).collect()
    }
}

/// The set of registered workers a coordinator scatters to.
#[derive(Debug, Clone)]
pub struct Cluster {
    workers: Vec<SocketAddr>,
    pub connect_timeout: Duration,
    /// Per-batch reply timeout; `None` waits indefinitely.
    pub io_timeout: Option<Duration>,
}

impl Cluster {
    pub fn new<A: ToSocketAddrs + std::fmt::Display>(
        addresses: impl IntoIterator<Item = A>,
    ) -> Result<Self, ClusterError> {
        let mut workers = Vec::new();
        for a in addresses {
            let addr = a
                .to_socket_addrs()
                .ok()
                .and_then(|mut it| it.next())
                .ok_or_else(|| ClusterError::Address(a.to_string()))?;
            workers.push(addr);
        }
        Ok(Cluster {
            workers,
            connect_timeout: Duration::from_secs(5),
            io_timeout: Some(Duration::from_secs(3600)),
        })
    }

    pub fn workers(&self) -> &[SocketAddr] {
        &self.workers
    }

    pub fn len(&self) -> usize {
        self.workers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workers.is_empty()
    }

    /// Pings every worker, returning the first failure.
    pub fn ping_all(&self) -> Result<(), ClusterError> {
        for (i, addr) in self.workers.iter().enumerate() {
            let fail = |message: String| ClusterError::WorkerFailed {
                worker: i,
                address: addr.to_string(),
                message,
                partial: Vec::new(),
            };
            match self.round_trip(addr, &Request::Ping) {
                Ok(Response::Pong { .. }) => {}
                Ok(other) => return Err(fail(format!("unexpected reply {other:?}"))),
                Err(e) => return Err(fail(e.to_string())),
            }
        }
        Ok(())
    }

    fn round_trip(&self, addr: &SocketAddr, request: &Request) -> io::Result<Response> {
        let stream = TcpStream::connect_timeout(addr, self.connect_timeout)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(self.io_timeout)?;
        let mut writer = BufWriter::new(stream.try_clone()?);
        protocol::send(&mut writer, request)?;
        protocol::recv(&mut BufReader::new(stream))
    }

    /// Scatters the ensemble over the first `n_virtual_qpus` workers and
    /// gathers the results in order. Circuit `i` always uses seed
    /// `seed + i`, so results do not depend on the partitioning.
    pub fn scatter_execute(&self, job: &EnsembleJob) -> Result<EnsembleResult, ClusterError> {
        let start = Instant::now();
        let k = job.n_virtual_qpus;
        if k == 0 {
            return Err(ClusterError::NoWorkers);
        }
        if k > self.workers.len() {
            return Err(ClusterError::NotEnoughWorkers {
                requested: k,
                available: self.workers.len(),
            });
        }
        let ranges = partition(job.circuits.len(), k)?;
        let (shots, base_seed) = match job.mode {
            Mode::Exact => (None, 0),
            Mode::Shots { shots, seed } => (Some(shots), seed),
        };

        let replies: Vec<Result<(Vec<Outcome>, f64), String>> = thread::scope(|scope| {
            let tasks: Vec<_> = ranges
                .iter()
                .enumerate()
                .map(|(w, range)| {
                    let addr = self.workers[w];
                    let range = range.clone();
                    scope.spawn(move || {
                        if range.is_empty() {
                            return Ok((Vec::new(), 0.0));
                        }
                        let request = Request::Batch {
                            job_id: w as u64,
                            circuits: job.circuits[range.clone()].to_vec(),
                            shots,
                            seeds: range.clone().map(|i| circuit_seed(base_seed, i)).collect(),
                        };
                        match self.round_trip(&addr, &request) {
                            Ok(Response::BatchResult {
                                results,
                                execution_seconds,
                                ..
                            }) if results.len() == range.len() => Ok((results, execution_seconds)),
                            Ok(Response::Error { code, message, .. }) => {
                                Err(format!("{code:?}: {message}"))
                            }
                            Ok(other) => Err(format!("unexpected reply {other:?}")),
                            Err(e) => Err(format!("transport error: {e}")),
                        }
                    })
                })
                .collect();
            tasks
                .into_iter()
                .map(|t| t.join().unwrap_or_else(|_| Err("coordinator thread panicked".into())))
                .collect()
        });

        let mut partial: Vec<Option<Outcome>> = vec![None; job.circuits.len()];
        let mut execution_seconds = Vec::with_capacity(k);
        let mut failure = None;
        for (w, (reply, range)) in replies.into_iter().zip(&ranges).enumerate() {
            match reply {
                Ok((results, secs)) => {
                    for (slot, r) in partial[range.clone()].iter_mut().zip(results) {
                        *slot = Some(r);
                    }
                    execution_seconds.push(secs);
                }
                Err(message) => {
                    execution_seconds.push(0.0);
                    failure.get_or_insert((w, message));
                }
            }
        }
        if let Some((worker, message)) = failure {
            return Err(ClusterError::WorkerFailed {
                worker,
                address: self.workers[worker].to_string(),
                message,
                partial,
            });
        }
        let results = partial.into_iter().map(|r| r.expect("all batches succeeded")).collect();
        let wall_seconds = start.elapsed().as_secs_f64();
        let max_exec = execution_seconds.iter().copied().fold(0.0, f64::max);
        Ok(EnsembleResult {
            results,
            timing: EnsembleTiming {
                execution_seconds,
                pre_post_seconds: (wall_seconds - max_exec).max(0.0),
                wall_seconds,
            },
            circuits_per_worker: ranges.iter().map(|r| r.len()).collect(),
        })
    }
}

/// Worker daemons running on background threads of this process.
pub struct LocalCluster {
    pub handles: Vec<WorkerHandle>,
    cluster: Cluster,
}

impl LocalCluster {
    /// Starts `n` workers on ephemeral loopback ports.
    pub fn spawn(n: usize, config: WorkerConfig) -> io::Result<Self> {
        let mut handles = Vec::with_capacity(n);
        for i in 0..n {
            let cfg = WorkerConfig {
                worker_id: format!("{}-{i}", config.worker_id),
                ..config.clone()
            };
            handles.push(WorkerDaemon::bind("127.0.0.1:0", cfg)?.spawn()?);
        }
        let cluster = Cluster::new(handles.iter().map(|h| h.addr()))
            .map_err(|e| io::Error::other(e.to_string()))?;
        Ok(LocalCluster { handles, cluster })
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn addresses(&self) -> Vec<SocketAddr> {
        self.handles.iter().map(|h| h.addr()).collect()
    }
}
