//! Pauli-string Hamiltonians and term-wise expectation values.
//!
//! Every non-identity term becomes its own measurement circuit: the ansatz
//! followed by basis changes for X (`H`) and Y (`Sdg` then `H`) letters and a
//! measurement of each qubit in the term's support. Terms are not grouped.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, GateKind};
use crate::sim::{SimError, Simulator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("term {term}: malformed coefficient {text:?}")]
    Coefficient { term: usize, text: String },
    #[error("term {term}: complex coefficient {text:?} (only real coefficients are supported)")]
    ComplexCoefficient { term: usize, text: String },
    #[error("term {term}: unknown Pauli operator {token:?}")]
    UnknownPauli { term: usize, token: String },
    #[error("term {term}: qubit {qubit} appears more than once")]
    RepeatedQubit { term: usize, qubit: usize },
    #[error("operator acts on {needed} qubits but num_qubits is {requested}")]
    TooFewQubits { needed: usize, requested: usize },
    #[error("term {term}: {source}")]
    Circuit {
        term: usize,
        #[source]
        source: CircuitError,
    },
    #[error("term {term}: {source}")]
    Backend {
        term: usize,
        #[source]
        source: SimError,
    },
    #[error("expected {expected} term values, got {got}")]
    ValueCount { expected: usize, got: usize },
}

type Result<T> = std::result::Result<T, ObservableError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    fn letter(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `coefficient · ⊗ σ_q` with identity on unlisted qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub paulis: BTreeMap<usize, Pauli>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, paulis: impl IntoIterator<Item = (usize, Pauli)>) -> Self {
        PauliTerm {
            coefficient,
            paulis: paulis.into_iter().collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.paulis.is_empty()
    }

    /// Ansatz plus post-rotations and a measurement of each support qubit,
    /// in ascending qubit order, into classical bits `0..k`.
    pub fn measurement_circuit(&self, ansatz: &Circuit) -> std::result::Result<Circuit, CircuitError> {
        if ansatz.is_measured() {
            return Err(CircuitError::HasMeasurements);
        }
        let mut circuit = ansatz.clone();
        for (&q, &p) in &self.paulis {
            match p {
                Pauli::X => {
                    circuit.append(GateKind::H, &[q], None)?;
                }
                Pauli::Y => {
                    circuit.append(GateKind::Sdg, &[q], None)?;
                    circuit.append(GateKind::H, &[q], None)?;
                }
                Pauli::Z => {}
            }
        }
        for (clbit, &q) in self.paulis.keys().enumerate() {
            circuit.measure(q, clbit)?;
        }
        Ok(circuit)
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?})", self.coefficient)?;
        for (q, p) in &self.paulis {
            write!(f, " {}{q}", p.letter())?;
        }
        Ok(())
    }
}

/// Weighted sum of Pauli strings with distinct supports, in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliOperator {
    terms: Vec<PauliTerm>,
    num_qubits: usize,
}

/// How term expectations are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Exact parity from the statevector.
    Exact,
    /// Shot estimate; term `i` is sampled with seed `seed + i`.
    Shots { shots: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Energy {
    pub energy: f64,
    /// Unweighted `⟨term_i⟩`; 1 for identity terms.
    pub per_term: Vec<f64>,
}

/// Seed used for the `index`-th circuit of an ensemble.
pub fn circuit_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

impl PauliOperator {
    /// Builds an operator, merging duplicate supports into the first occurrence.
    pub fn new(terms: impl IntoIterator<Item = PauliTerm>) -> Self {
        let mut merged: Vec<PauliTerm> = Vec::new();
        let mut seen: HashMap<BTreeMap<usize, Pauli>, usize> = HashMap::new();
        for term in terms {
            match seen.get(&term.paulis) {
                Some(&i) => merged[i].coefficient += term.coefficient,
                None => {
                    seen.insert(term.paulis.clone(), merged.len());
                    merged.push(term);
                }
            }
        }
        let num_qubits = merged
            .iter()
            .filter_map(|t| t.paulis.keys().next_back())
            .max()
            .map_or(1, |&q| q + 1);
        PauliOperator {
            terms: merged,
            num_qubits,
        }
    }

    pub fn with_num_qubits(mut self, num_qubits: usize) -> Result<Self> {
        let needed = self.min_qubits();
        if num_qubits < needed || num_qubits == 0 {
            return Err(ObservableError::TooFewQubits {
                needed,
                requested: num_qubits,
            });
        }
        self.num_qubits = num_qubits;
        Ok(self)
    }

    fn min_qubits(&self) -> usize {
        self.terms
            .iter()
            .filter_map(|t| t.paulis.keys().next_back())
            .max()
            .map_or(1, |&q| q + 1)
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Σ |cᵢ|, the scale of worst-case shot noise.
    pub fn coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// Parses the inline form `(0.5) Z0 + (-0.25) X0 Y1` or the line-per-term
    /// form `0.5 Z0` with `#` comments. Both may be mixed.
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (index, segment) in split_terms(text).into_iter().enumerate() {
            terms.push(parse_term(index, &segment)?);
        }
        Ok(PauliOperator::new(terms))
    }

    /// `(term index, circuit)` for every non-identity term, in term order.
    pub fn measurement_circuits(&self, ansatz: &Circuit) -> Result<Vec<(usize, Circuit)>> {
        self.terms
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_identity())
            .map(|(term, t)| {
                t.measurement_circuit(ansatz)
                    .map(|c| (term, c))
                    .map_err(|source| ObservableError::Circuit { term, source })
            })
            .collect()
    }

    /// Combines per-circuit values (one per non-identity term, in order) into
    /// the weighted energy.
    pub fn assemble(&self, circuit_values: &[f64]) -> Result<Energy> {
        let expected = self.terms.iter().filter(|t| !t.is_identity()).count();
        if circuit_values.len() != expected {
            return Err(ObservableError::ValueCount {
                expected,
                got: circuit_values.len(),
            });
        }
        let mut values = circuit_values.iter();
        let per_term: Vec<f64> = self
            .terms
            .iter()
            .map(|t| {
                if t.is_identity() {
                    1.0
                } else {
                    *values.next().expect("length checked")
                }
            })
            .collect();
        let energy = self
            .terms
            .iter()
            .zip(&per_term)
            .map(|(t, v)| t.coefficient * v)
            .sum();
        Ok(Energy { energy, per_term })
    }

    /// `⟨ψ|H|ψ⟩` for the state prepared by a literal ansatz, evaluated locally.
    pub fn expectation(&self, ansatz: &Circuit, mode: Mode, sim: &Simulator) -> Result<Energy> {
        let circuits = self.measurement_circuits(ansatz)?;
        let mut values = Vec::with_capacity(circuits.len());
        for (k, (term, circuit)) in circuits.iter().enumerate() {
            let value = match mode {
                Mode::Exact => sim.exact_parity(circuit),
                Mode::Shots { shots, seed } => sim
                    .run(circuit, shots, circuit_seed(seed, k))
                    .map(|r| r.parity_expectation()),
            }
            .map_err(|source| ObservableError::Backend { term: *term, source })?;
            values.push(value);
        }
        self.assemble(&values)
    }

    /// Random operator with `num_terms` distinct non-identity strings; each
    /// qubit's letter is uniform over {I, X, Y, Z} and coefficients are
    /// uniform in [−1, 1].
    pub fn random(num_qubits: usize, num_terms: usize, seed: u64) -> Self {
        assert!(num_qubits > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::new();
        let mut terms = Vec::with_capacity(num_terms);
        while terms.len() < num_terms {
            let paulis: BTreeMap<usize, Pauli> = (0..num_qubits)
                .filter_map(|q| match rng.gen_range(0..4) {
                    1 => Some((q, Pauli::X)),
                    2 => Some((q, Pauli::Y)),
                    3 => Some((q, Pauli::Z)),
                    _ => None,
                })
                .collect();
            let coefficient = rng.gen_range(-1.0..=1.0);
            if paulis.is_empty() || !seen.insert(paulis.clone()) {
                continue;
            }
            terms.push(PauliTerm {
                coefficient,
                paulis,
            });
        }
        PauliOperator {
            terms,
            num_qubits,
        }
    }
}

impl FromStr for PauliOperator {
    type Err = ObservableError;

    fn from_str(s: &str) -> Result<Self> {
        PauliOperator::parse(s)
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Splits on top-level `+` and on line breaks; `#` starts a comment.
fn split_terms(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut depth = 0i32;
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                '+' if depth == 0 && !is_exponent_sign(&chars, i) => {
                    out.push(std::mem::take(&mut current));
                    continue;
                }
                _ => {}
            }
            current.push(c);
        }
        out.push(current);
    }
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn is_exponent_sign(chars: &[char], i: usize) -> bool {
    i >= 2
        && matches!(chars[i - 1], 'e' | 'E')
        && (chars[i - 2].is_ascii_digit() || chars[i - 2] == '.')
}

fn parse_term(term: usize, segment: &str) -> Result<PauliTerm> {
    let bad = |text: &str| ObservableError::Coefficient {
        term,
        text: text.to_string(),
    };
    let (coefficient, rest) = if let Some(inner) = segment.strip_prefix('(') {
        let close = inner.find(')').ok_or_else(|| bad(segment))?;
        let body = &inner[..close];
        let mut parts = body.split(',');
        let re: f64 = parts.next().unwrap_or("").trim().parse().map_err(|_| bad(body))?;
        if let Some(im) = parts.next() {
            let im: f64 = im.trim().parse().map_err(|_| bad(body))?;
            if parts.next().is_some() {
                return Err(bad(body));
            }
            if im != 0.0 {
                return Err(ObservableError::ComplexCoefficient {
                    term,
                    text: body.to_string(),
                });
            }
        }
        (re, &inner[close + 1..])
    } else {
        let first = segment.split_whitespace().next().unwrap_or("");
        match first.parse::<f64>() {
            Ok(v) => (v, segment[first.len()..].trim_start()),
            Err(_) if first.starts_with(['-', '.']) || first.starts_with(|c: char| c.is_ascii_digit()) => {
                return Err(bad(first))
            }
            Err(_) => (1.0, segment),
        }
    };
    if !coefficient.is_finite() {
        return Err(bad(segment));
    }

    let mut paulis = BTreeMap::new();
    for token in rest.split_whitespace() {
        let unknown = || ObservableError::UnknownPauli {
            term,
            token: token.to_string(),
        };
        let mut chars = token.chars();
        let letter = chars.next().ok_or_else(unknown)?;
        let qubit: usize = chars.as_str().parse().map_err(|_| unknown())?;
        let pauli = match letter {
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            'I' => None,
            _ => return Err(unknown()),
        };
        if paulis.contains_key(&qubit) {
            return Err(ObservableError::RepeatedQubit { term, qubit });
        }
        if let Some(p) = pauli {
            paulis.insert(qubit, p);
        }
    }
    Ok(PauliTerm {
        coefficient,
        paulis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;

    #[test]
    fn single_term() {
        let op = PauliOperator::parse("(1.0) Z0").unwrap();
        assert_eq!(op.terms(), &[PauliTerm::new(1.0, [(0, Pauli::Z)])]);
        assert_eq!(op.num_qubits(), 1);
    }

    #[test]
    fn merges_duplicates() {
        let op = PauliOperator::parse("(0.5) Z0 + (0.5) Z0").unwrap();
        assert_eq!(op.len(), 1);
        assert_eq!(op.terms()[0].coefficient, 1.0);
    }

    #[test]
    fn three_qubit_term_round_trips() {
        let op = PauliOperator::parse("(0.25) X0 Y1 Z2").unwrap();
        assert_eq!(op.len(), 1);
        assert_eq!(op.num_qubits(), 3);
        assert_eq!(op.terms()[0].paulis.len(), 3);
        assert_eq!(PauliOperator::parse(&op.to_string()).unwrap(), op);
    }

    #[test]
    fn file_form_and_xacc_coefficients() {
        let text = "# H2-like\n-0.5 I0\n0.25 Z0 Z1 # comment\n(1e+0, 0) X0 X1\n\n";
        let op = PauliOperator::parse(text).unwrap();
        assert_eq!(op.len(), 3);
        assert!(op.terms()[0].is_identity());
        assert_eq!(op.terms()[0].coefficient, -0.5);
        assert_eq!(op.terms()[2].coefficient, 1.0);
        assert_eq!(op.num_qubits(), 2);
        let bare = PauliOperator::parse("Z0 Z1 + 2.5e-1 X1").unwrap();
        assert_eq!(bare.terms()[0].coefficient, 1.0);
        assert_eq!(bare.terms()[1].coefficient, 0.25);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            PauliOperator::parse("(abc) Z0"),
            Err(ObservableError::Coefficient { .. })
        ));
        assert!(matches!(
            PauliOperator::parse("(0.5, 1.0) Z0"),
            Err(ObservableError::ComplexCoefficient { .. })
        ));
        assert!(matches!(
            PauliOperator::parse("(0.5) Q0"),
            Err(ObservableError::UnknownPauli { .. })
        ));
        assert!(matches!(
            PauliOperator::parse("(0.5) Z"),
            Err(ObservableError::UnknownPauli { .. })
        ));
        assert!(matches!(
            PauliOperator::parse("(0.5) Z0 X0"),
            Err(ObservableError::RepeatedQubit { qubit: 0, .. })
        ));
        assert!(matches!(
            PauliOperator::parse("1.2.3 Z0"),
            Err(ObservableError::Coefficient { .. })
        ));
    }

    #[test]
    fn num_qubits_override() {
        let op = PauliOperator::parse("(1) Z2").unwrap();
        assert_eq!(op.clone().with_num_qubits(5).unwrap().num_qubits(), 5);
        assert!(op.with_num_qubits(2).is_err());
    }

    #[test]
    fn z_term_needs_no_rotation() {
        let mut b = CircuitBuilder::new();
        b.h(0).unwrap().cnot(0, 1).unwrap();
        let ansatz = b.build().unwrap();
        let c = PauliTerm::new(1.0, [(0, Pauli::Z)]).measurement_circuit(&ansatz).unwrap();
        assert_eq!(c.gates(), ansatz.gates());
        assert_eq!(c.measurements(), &[(0, 0)]);
    }

    #[test]
    fn x_and_y_rotations() {
        let ansatz = Circuit::new(2).unwrap();
        let x = PauliTerm::new(1.0, [(0, Pauli::X)]).measurement_circuit(&ansatz).unwrap();
        assert_eq!(x.gates().len(), 1);
        assert_eq!(x.gates()[0].kind, GateKind::H);
        assert!(Simulator::default().exact_parity(&x).unwrap().abs() < 1e-15);

        let y = PauliTerm::new(1.0, [(0, Pauli::Y), (1, Pauli::Z)])
            .measurement_circuit(&ansatz)
            .unwrap();
        let kinds: Vec<_> = y.gates().iter().map(|g| g.kind).collect();
        assert_eq!(kinds, vec![GateKind::Sdg, GateKind::H]);
        assert_eq!(y.measurements(), &[(0, 0), (1, 1)]);

        let mut measured = ansatz.clone();
        measured.measure_all().unwrap();
        assert_eq!(
            PauliTerm::new(1.0, [(0, Pauli::Z)]).measurement_circuit(&measured),
            Err(CircuitError::HasMeasurements)
        );
    }

    #[test]
    fn energies() {
        let sim = Simulator::default();
        let h = PauliOperator::parse("(0.5) Z0 + (0.5) Z1").unwrap();
        let e = h.expectation(&Circuit::new(2).unwrap(), Mode::Exact, &sim).unwrap();
        assert!((e.energy - 1.0).abs() < 1e-15);

        let mut b = CircuitBuilder::new();
        b.h(0).unwrap();
        let plus = b.build().unwrap();
        let x = PauliOperator::parse("(1.0) X0").unwrap();
        assert!((x.expectation(&plus, Mode::Exact, &sim).unwrap().energy - 1.0).abs() < 1e-12);

        let with_identity = PauliOperator::parse("(2.0) + (1.0) X0").unwrap();
        let e = with_identity.expectation(&plus, Mode::Exact, &sim).unwrap();
        assert!((e.energy - 3.0).abs() < 1e-12);
        assert_eq!(e.per_term.len(), 2);
        assert_eq!(with_identity.measurement_circuits(&plus).unwrap().len(), 1);
    }

    #[test]
    fn backend_errors_name_the_term() {
        let sim = Simulator::new(1);
        let h = PauliOperator::parse("(1) + (1) Z0").unwrap();
        let err = h.expectation(&Circuit::new(2).unwrap(), Mode::Exact, &sim).unwrap_err();
        assert!(matches!(err, ObservableError::Backend { term: 1, .. }));
    }

    #[test]
    fn random_operator_is_distinct() {
        let op = PauliOperator::random(6, 200, 9);
        assert_eq!(op.len(), 200);
        assert_eq!(PauliOperator::new(op.terms().to_vec()).len(), 200);
        assert!(op.terms().iter().all(|t| !t.is_identity()));
        assert_eq!(op, PauliOperator::random(6, 200, 9));
    }
}
