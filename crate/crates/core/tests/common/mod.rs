//! Dense-matrix reference implementations. Every operator is written out as a
//! full `2ⁿ × 2ⁿ` matrix from its textbook definition, sharing no code with
//! the backend.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qvirt::{Angle, Circuit, GateKind, Pauli, PauliOperator, PauliTerm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Matrix = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn m2(a: [[Complex64; 2]; 2]) -> Matrix {
    Matrix::from_fn(2, 2, |r, c| a[r][c])
}

pub fn pauli_matrix(p: Pauli) -> Matrix {
    match p {
        Pauli::X => m2([[ZERO, ONE], [ONE, ZERO]]),
        Pauli::Y => m2([[ZERO, -I], [I, ZERO]]),
        Pauli::Z => m2([[ONE, ZERO], [ZERO, -ONE]]),
    }
}

/// `exp(−iθP/2) = cos(θ/2)·1 − i·sin(θ/2)·P`.
fn rotation(p: Pauli, theta: f64) -> Matrix {
    Matrix::identity(2, 2) * Complex64::from((theta / 2.0).cos())
        - pauli_matrix(p) * (I * (theta / 2.0).sin())
}

pub fn single_qubit_matrix(kind: GateKind, theta: f64) -> Matrix {
    let h = Complex64::from(1.0 / 2f64.sqrt());
    match kind {
        GateKind::I => Matrix::identity(2, 2),
        GateKind::X => pauli_matrix(Pauli::X),
        GateKind::Y => pauli_matrix(Pauli::Y),
        GateKind::Z => pauli_matrix(Pauli::Z),
        GateKind::H => m2([[h, h], [h, -h]]),
        GateKind::S => m2([[ONE, ZERO], [ZERO, I]]),
        GateKind::Sdg => m2([[ONE, ZERO], [ZERO, -I]]),
        GateKind::T => m2([[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, PI / 4.0)]]),
        GateKind::Tdg => m2([[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, -PI / 4.0)]]),
        GateKind::RX => rotation(Pauli::X, theta),
        GateKind::RY => rotation(Pauli::Y, theta),
        GateKind::RZ => rotation(Pauli::Z, theta),
        other => panic!("{other} is not a single-qubit unitary"),
    }
}

fn bit(index: usize, q: usize) -> usize {
    (index >> q) & 1
}

/// Full-register matrix of a one-qubit operator `m` acting on qubit `q`;
/// basis index bit `q` is qubit `q`.
pub fn embed(m: &Matrix, q: usize, n: usize) -> Matrix {
    let mask = !(1usize << q);
    Matrix::from_fn(1 << n, 1 << n, |r, c| {
        if r & mask == c & mask {
            m[(bit(r, q), bit(c, q))]
        } else {
            ZERO
        }
    })
}

pub fn gate_matrix(kind: GateKind, qubits: &[usize], theta: f64, n: usize) -> Matrix {
    let dim = 1 << n;
    match kind {
        GateKind::CNOT => {
            let (c, t) = (qubits[0], qubits[1]);
            Matrix::from_fn(dim, dim, |r, col| {
                let image = if bit(col, c) == 1 { col ^ (1 << t) } else { col };
                if r == image {
                    ONE
                } else {
                    ZERO
                }
            })
        }
        GateKind::CZ => {
            let (a, b) = (qubits[0], qubits[1]);
            Matrix::from_fn(dim, dim, |r, col| match (r == col, bit(col, a) & bit(col, b)) {
                (false, _) => ZERO,
                (true, 1) => -ONE,
                (true, _) => ONE,
            })
        }
        _ => embed(&single_qubit_matrix(kind, theta), qubits[0], n),
    }
}

fn literal_gates(circuit: &Circuit) -> impl Iterator<Item = Matrix> + '_ {
    let n = circuit.num_qubits();
    circuit.gates().iter().filter(|g| g.kind != GateKind::Measure).map(move |g| {
        let theta = match g.angle {
            Some(Angle::Literal(t)) => t,
            Some(Angle::Symbol(_)) => panic!("oracle needs a literal circuit"),
            None => 0.0,
        };
        gate_matrix(g.kind, &g.qubits, theta, n)
    })
}

/// Product of all gate matrices of a literal circuit, measurements ignored.
pub fn circuit_unitary(circuit: &Circuit) -> Matrix {
    let dim = 1 << circuit.num_qubits();
    literal_gates(circuit).fold(Matrix::identity(dim, dim), |u, g| g * u)
}

/// `U|0…0⟩`, applying one full-register gate matrix at a time.
pub fn oracle_state(circuit: &Circuit) -> Vector {
    let mut zero = Vector::zeros(1 << circuit.num_qubits());
    zero[0] = ONE;
    literal_gates(circuit).fold(zero, |psi, g| g * psi)
}

pub fn pauli_string_matrix(term: &PauliTerm, n: usize) -> Matrix {
    Matrix::from_fn(1 << n, 1 << n, |r, c| {
        let mut v = Complex64::from(term.coefficient);
        for q in 0..n {
            let factor = match term.paulis.get(&q) {
                Some(&p) => pauli_matrix(p)[(bit(r, q), bit(c, q))],
                None if bit(r, q) == bit(c, q) => ONE,
                None => ZERO,
            };
            if factor == ZERO {
                return ZERO;
            }
            v *= factor;
        }
        v
    })
}

pub fn hamiltonian_matrix(h: &PauliOperator, n: usize) -> Matrix {
    h.terms()
        .iter()
        .fold(Matrix::zeros(1 << n, 1 << n), |acc, t| acc + pauli_string_matrix(t, n))
}

/// `ψ†Hψ`.
pub fn oracle_energy(h: &PauliOperator, ansatz: &Circuit) -> f64 {
    let psi = oracle_state(ansatz);
    let e = psi.adjoint() * hamiltonian_matrix(h, ansatz.num_qubits()) * &psi;
    e[(0, 0)].re
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn ground_energy(h: &PauliOperator, n: usize) -> f64 {
    hamiltonian_matrix(h, n)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Literal circuit with `gates` gates uniformly drawn from every unitary kind.
pub fn random_circuit(rng: &mut ChaCha8Rng, n: usize, gates: usize) -> Circuit {
    let kinds: Vec<GateKind> = GateKind::ALL
        .iter()
        .copied()
        .filter(|k| *k != GateKind::Measure && (n >= 2 || k.num_qubits() == 1))
        .collect();
    let mut c = Circuit::new(n).unwrap();
    for _ in 0..gates {
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let a = rng.gen_range(0..n);
        let qubits = if kind.num_qubits() == 2 {
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            vec![a, b]
        } else {
            vec![a]
        };
        let angle = kind
            .is_rotation()
            .then(|| Angle::Literal(rng.gen_range(-2.0 * PI..2.0 * PI)));
        c.append(kind, &qubits, angle).unwrap();
    }
    c
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The parameterized two-qubit circuit of the session quickstart.
pub const LISTING: &str = r#"__qpu__ void QBCIRCUIT(qreg q) {
    OPENQASM 2.0;
    include "qelib1.inc";
    creg c[2];
    x q[1];
    ry(QBTHETA_0) q[0];
    cx q[1], q[0];
    measure q[0] -> c[0];
    measure q[1] -> c[1];
}"#;
