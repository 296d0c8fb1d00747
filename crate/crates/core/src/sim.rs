//! Noise-free statevector backend.
//!
//! Basis index bit `q` is the state of qubit `q` (qubit 0 is least
//! significant). Gates are applied in place with one strided pass over the
//! amplitudes; no full unitaries are formed.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, GateKind};

pub const DEFAULT_MAX_QUBITS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("{num_qubits} qubits exceeds the simulator cap of {max_qubits}")]
    TooManyQubits { num_qubits: usize, max_qubits: usize },
    #[error("circuit has no measurements")]
    NoMeasurements,
    #[error("shot count must be positive")]
    ZeroShots,
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
}

type Result<T> = std::result::Result<T, SimError>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[0] = ONE;
        StateVector {
            num_qubits,
            amplitudes,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies a literal gate. Measurement gates are not valid here.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        for &q in &gate.qubits {
            if q >= self.num_qubits {
                return Err(SimError::QubitOutOfRange {
                    qubit: q,
                    num_qubits: self.num_qubits,
                });
            }
        }
        let theta = gate.literal_angle()?;
        let q = gate.qubits[0];
        match gate.kind {
            GateKind::I | GateKind::Measure => {}
            GateKind::X => self.apply_x(q),
            GateKind::Z => self.apply_phase(q, -ONE),
            GateKind::S => self.apply_phase(q, I),
            GateKind::Sdg => self.apply_phase(q, -I),
            GateKind::T => self.apply_phase(q, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)),
            GateKind::Tdg => {
                self.apply_phase(q, Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4))
            }
            GateKind::RZ => self.apply_diagonal(
                q,
                Complex64::from_polar(1.0, -theta / 2.0),
                Complex64::from_polar(1.0, theta / 2.0),
            ),
            GateKind::Y => self.apply_single(q, [[ZERO, -I], [I, ZERO]]),
            GateKind::H => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_single(q, [[h, h], [h, -h]])
            }
            GateKind::RX => {
                let (s, c) = (theta / 2.0).sin_cos();
                let (c, s) = (Complex64::new(c, 0.0), Complex64::new(0.0, -s));
                self.apply_single(q, [[c, s], [s, c]])
            }
            GateKind::RY => {
                let (s, c) = (theta / 2.0).sin_cos();
                let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
                self.apply_single(q, [[c, -s], [s, c]])
            }
            GateKind::CNOT => self.apply_cnot(q, gate.qubits[1]),
            GateKind::CZ => self.apply_cz(q, gate.qubits[1]),
        }
        Ok(())
    }

    fn apply_single(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let stride = 1 << q;
        for block in (0..self.amplitudes.len()).step_by(stride << 1) {
            for i in block..block + stride {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i + stride];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_diagonal(&mut self, q: usize, d0: Complex64, d1: Complex64) {
        let mask = 1 << q;
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= if i & mask == 0 { d0 } else { d1 };
        }
    }

    fn apply_phase(&mut self, q: usize, phase: Complex64) {
        let stride = 1 << q;
        for block in (0..self.amplitudes.len()).step_by(stride << 1) {
            for a in &mut self.amplitudes[block + stride..block + 2 * stride] {
                *a *= phase;
            }
        }
    }

    fn apply_x(&mut self, q: usize) {
        let stride = 1 << q;
        for block in (0..self.amplitudes.len()).step_by(stride << 1) {
            for i in block..block + stride {
                self.amplitudes.swap(i, i + stride);
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cmask, tmask) = (1 << control, 1 << target);
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = (1 << a) | (1 << b);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }

    /// Exact `⟨ψ| Z_{q1} ⊗ … ⊗ Z_{qk} |ψ⟩`. An empty list yields 1.
    pub fn expectation_z(&self, qubits: &[usize]) -> Result<f64> {
        let mut mask = 0usize;
        for &q in qubits {
            if q >= self.num_qubits {
                return Err(SimError::QubitOutOfRange {
                    qubit: q,
                    num_qubits: self.num_qubits,
                });
            }
            mask ^= 1 << q;
        }
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let p = a.norm_sqr();
                if (i & mask).count_ones().is_multiple_of(2) {
                    p
                } else {
                    -p
                }
            })
            .sum())
    }
}

/// Measured bitstring histogram. Character `j` of each key is classical bit `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsResult {
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
    /// Seconds spent in simulation and sampling.
    pub execution_time: f64,
}

impl CountsResult {
    /// Shot estimate of the Z-parity over every classical bit, `(N₊ − N₋)/shots`.
    pub fn parity_expectation(&self) -> f64 {
        let signed: i64 = self
            .counts
            .iter()
            .map(|(key, &n)| {
                let ones = key.bytes().filter(|&b| b == b'1').count();
                if ones % 2 == 0 {
                    n as i64
                } else {
                    -(n as i64)
                }
            })
            .sum();
        signed as f64 / self.shots as f64
    }

    pub fn probability(&self, key: &str) -> f64 {
        self.counts.get(key).copied().unwrap_or(0) as f64 / self.shots as f64
    }
}

/// Statevector simulator with a configurable qubit cap.
#[derive(Debug, Clone, Copy)]
pub struct Simulator {
    pub max_qubits: usize,
}

impl Default for Simulator {
    fn default() -> Self {
        Simulator {
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }
}

impl Simulator {
    pub fn new(max_qubits: usize) -> Self {
        Simulator { max_qubits }
    }

    pub fn check(&self, circuit: &Circuit) -> Result<()> {
        if circuit.num_qubits() > self.max_qubits {
            return Err(SimError::TooManyQubits {
                num_qubits: circuit.num_qubits(),
                max_qubits: self.max_qubits,
            });
        }
        if let Some(gate) = circuit.gates().iter().find(|g| g.literal_angle().is_err()) {
            gate.literal_angle()?;
        }
        Ok(())
    }

    /// Applies every gate to `|0…0⟩`; measurements are ignored.
    pub fn simulate(&self, circuit: &Circuit) -> Result<StateVector> {
        self.check(circuit)?;
        let mut state = StateVector::zero(circuit.num_qubits());
        for gate in circuit.gates() {
            state.apply(gate)?;
        }
        Ok(state)
    }

    /// Simulates and samples in one step; `execution_time` covers both.
    pub fn run(&self, circuit: &Circuit, shots: u64, seed: u64) -> Result<CountsResult> {
        let start = Instant::now();
        if !circuit.is_measured() {
            return Err(SimError::NoMeasurements);
        }
        let state = self.simulate(circuit)?;
        let mut result = sample(&state, circuit, shots, seed)?;
        result.execution_time = start.elapsed().as_secs_f64();
        Ok(result)
    }

    /// Exact Z-parity expectation over the circuit's measured qubits.
    pub fn exact_parity(&self, circuit: &Circuit) -> Result<f64> {
        let state = self.simulate(circuit)?;
        let qubits: Vec<usize> = circuit.measurements().iter().map(|&(q, _)| q).collect();
        state.expectation_z(&qubits)
    }
}

/// Draws `shots` samples of the measured qubits from `|amplitude|²`.
///
/// Marginals are accumulated directly from the amplitudes; the result is a
/// pure function of `(state, circuit, shots, seed)`.
pub fn sample(state: &StateVector, circuit: &Circuit, shots: u64, seed: u64) -> Result<CountsResult> {
    let measured = circuit.measurements();
    if measured.is_empty() {
        return Err(SimError::NoMeasurements);
    }
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    for &(q, _) in measured {
        if q >= state.num_qubits {
            return Err(SimError::QubitOutOfRange {
                qubit: q,
                num_qubits: state.num_qubits,
            });
        }
    }

    // Outcome bit r holds measurement r.
    let mut marginal = vec![0.0f64; 1 << measured.len()];
    for (i, a) in state.amplitudes.iter().enumerate() {
        let outcome = measured
            .iter()
            .enumerate()
            .fold(0usize, |acc, (r, &(q, _))| acc | (((i >> q) & 1) << r));
        marginal[outcome] += a.norm_sqr();
    }
    let mut support = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0.0;
    for (outcome, &p) in marginal.iter().enumerate() {
        if p > 0.0 {
            total += p;
            support.push(outcome);
            cumulative.push(total);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0u64; support.len()];
    for _ in 0..shots {
        let u = rng.gen::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= u).min(support.len() - 1);
        hits[k] += 1;
    }

    let width = circuit.num_clbits();
    let counts = support
        .iter()
        .zip(hits)
        .filter(|(_, n)| *n > 0)
        .map(|(&outcome, n)| {
            let mut key = vec![b'0'; width];
            for (r, &(_, clbit)) in measured.iter().enumerate() {
                if (outcome >> r) & 1 == 1 {
                    key[clbit] = b'1';
                }
            }
            (String::from_utf8(key).expect("ascii"), n)
        })
        .collect();
    Ok(CountsResult {
        counts,
        shots,
        execution_time: 0.0,
    })
}
