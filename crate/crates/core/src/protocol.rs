//! Length-prefixed JSON wire protocol spoken between coordinators, executor
//! pools and worker daemons.
//!
//! Every frame is a 4-byte big-endian payload length followed by one UTF-8
//! JSON object whose `type` field selects the message.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;

/// Bumped on incompatible message changes; reported in `pong`.
pub const PROTOCOL_VERSION: u32 = 1;

/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME_LEN: usize = 256 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Ping,
    /// One circuit. `shots: null` selects exact mode.
    Execute {
        job_id: u64,
        circuit: Circuit,
        shots: Option<u64>,
        seed: u64,
    },
    /// Circuits executed in order; `seeds[i]` belongs to `circuits[i]`.
    Batch {
        job_id: u64,
        circuits: Vec<Circuit>,
        shots: Option<u64>,
        seeds: Vec<u64>,
    },
    Shutdown,
}

/// Result for one circuit: histogram in shots mode, or the exact Z-parity
/// over the measured qubits (a single-element list) in exact mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Counts {
        counts: BTreeMap<String, u64>,
        shots: u64,
    },
    Expectations { expectations: Vec<f64> },
}

impl Outcome {
    /// Z-parity value: exact, or `(N₊ − N₋)/shots`.
    pub fn parity(&self) -> f64 {
        match self {
            Outcome::Expectations { expectations } => expectations.first().copied().unwrap_or(1.0),
            Outcome::Counts { counts, shots } => {
                let signed: i64 = counts
                    .iter()
                    .map(|(k, &n)| {
                        if k.bytes().filter(|&b| b == b'1').count() % 2 == 0 {
                            n as i64
                        } else {
                            -(n as i64)
                        }
                    })
                    .sum();
                signed as f64 / *shots as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Pong {
        worker_id: String,
        max_qubits: usize,
        max_shots: u64,
        threads: usize,
        protocol: u32,
    },
    Result {
        job_id: u64,
        #[serde(flatten)]
        outcome: Outcome,
        execution_seconds: f64,
    },
    BatchResult {
        job_id: u64,
        results: Vec<Outcome>,
        execution_seconds: f64,
    },
    Error {
        job_id: Option<u64>,
        code: ErrorCode,
        message: String,
    },
    Bye,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Frame was not a valid request.
    Malformed,
    /// Circuit or shot count exceeds the worker's capabilities.
    Capability,
    /// Circuit is not executable (symbols, missing measurements, ...).
    InvalidCircuit,
    /// Execution failed inside the backend.
    Backend,
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|&n| n as usize <= MAX_FRAME_LEN)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream before a header.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut header = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Some(payload))
}

/// Serializes a message into a complete frame (header included).
pub fn encode<T: Serialize>(message: &T) -> Vec<u8> {
    let json = serde_json::to_vec(message).expect("protocol messages always serialize");
    let mut frame = Vec::with_capacity(json.len() + 4);
    frame.extend_from_slice(&(json.len() as u32).to_be_bytes());
    frame.extend_from_slice(&json);
    frame
}

pub fn send<W: Write, T: Serialize>(w: &mut W, message: &T) -> io::Result<()> {
    w.write_all(&encode(message))?;
    w.flush()
}

/// Reads and decodes one message; end of stream is reported as `UnexpectedEof`.
pub fn recv<R: Read, T: for<'de> Deserialize<'de>>(r: &mut R) -> io::Result<T> {
    let frame = read_frame(r)?.ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof))?;
    serde_json::from_slice(&frame).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
