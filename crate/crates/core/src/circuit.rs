//! Circuit intermediate representation and a programmatic builder.
//!
//! A [`Circuit`] is an ordered gate list over a fixed number of qubits plus a
//! list of terminal measurements. Rotation angles are either literal radians
//! or placeholders `θ_i` that are resolved by [`Circuit::bind_parameters`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("{kind} acts on {expected} qubit(s), got {got}")]
    Arity {
        kind: GateKind,
        expected: usize,
        got: usize,
    },
    #[error("{kind} requires distinct qubits, got {qubits:?}")]
    RepeatedQubit { kind: GateKind, qubits: Vec<usize> },
    #[error("{kind} requires an angle argument")]
    MissingAngle { kind: GateKind },
    #[error("{kind} does not take an angle argument")]
    UnexpectedAngle { kind: GateKind },
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("qubit {qubit} has already been measured")]
    AlreadyMeasured { qubit: usize },
    #[error("classical bit {clbit} is already in use")]
    ClbitReused { clbit: usize },
    #[error("circuit already contains measurements")]
    HasMeasurements,
    #[error("expected {expected} parameter(s), got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("parameter indices are not contiguous: missing θ_{missing}")]
    ParameterGap { missing: usize },
    #[error("circuit contains unbound parameter θ_{index}")]
    Unbound { index: usize },
    #[error("a circuit needs at least one qubit")]
    NoQubits,
}

pub type Result<T, E = CircuitError> = std::result::Result<T, E>;

/// The supported gate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    I,
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    RX,
    RY,
    RZ,
    CNOT,
    CZ,
    #[serde(rename = "MEASURE")]
    Measure,
}

impl GateKind {
    pub const ALL: [GateKind; 15] = [
        GateKind::I,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::H,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::CNOT,
        GateKind::CZ,
        GateKind::Measure,
    ];

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ)
    }

    pub fn num_qubits(self) -> usize {
        match self {
            GateKind::CNOT | GateKind::CZ => 2,
            _ => 1,
        }
    }

    /// Lower-case OpenQASM name.
    pub fn qasm_name(self) -> &'static str {
        match self {
            GateKind::I => "id",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::H => "h",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::RX => "rx",
            GateKind::RY => "ry",
            GateKind::RZ => "rz",
            GateKind::CNOT => "cx",
            GateKind::CZ => "cz",
            GateKind::Measure => "measure",
        }
    }

    pub fn from_qasm_name(name: &str) -> Option<GateKind> {
        let kind = match name {
            "id" | "i" => GateKind::I,
            "x" => GateKind::X,
            "y" => GateKind::Y,
            "z" => GateKind::Z,
            "h" => GateKind::H,
            "s" => GateKind::S,
            "sdg" => GateKind::Sdg,
            "t" => GateKind::T,
            "tdg" => GateKind::Tdg,
            "rx" => GateKind::RX,
            "ry" => GateKind::RY,
            "rz" => GateKind::RZ,
            "cx" | "cnot" => GateKind::CNOT,
            "cz" => GateKind::CZ,
            _ => return None,
        };
        Some(kind)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            GateKind::Measure => "MEASURE",
            other => return write!(f, "{other:?}"),
        };
        f.write_str(name)
    }
}

/// A rotation angle: literal radians or the placeholder `θ_index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    #[serde(rename = "lit")]
    Literal(f64),
    #[serde(rename = "sym")]
    Symbol(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angle: Option<Angle>,
}

impl Gate {
    fn check(kind: GateKind, qubits: &[usize], angle: Option<Angle>) -> Result<()> {
        if qubits.len() != kind.num_qubits() {
            return Err(CircuitError::Arity {
                kind,
                expected: kind.num_qubits(),
                got: qubits.len(),
            });
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(CircuitError::RepeatedQubit {
                kind,
                qubits: qubits.to_vec(),
            });
        }
        match (kind.is_rotation(), angle) {
            (true, None) => Err(CircuitError::MissingAngle { kind }),
            (false, Some(_)) => Err(CircuitError::UnexpectedAngle { kind }),
            _ => Ok(()),
        }
    }

    /// Literal angle in radians, or 0 for gates without one.
    pub fn literal_angle(&self) -> Result<f64> {
        match self.angle {
            None => Ok(0.0),
            Some(Angle::Literal(v)) => Ok(v),
            Some(Angle::Symbol(index)) => Err(CircuitError::Unbound { index }),
        }
    }
}

/// Ordered gate list over `num_qubits` qubits with terminal measurements.
///
/// Measurements are kept apart from the gate list as `(qubit, clbit)` pairs;
/// once a qubit is measured no further gate may touch it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit")]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    measurements: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct RawCircuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    #[serde(default)]
    measurements: Vec<(usize, usize)>,
}

impl TryFrom<RawCircuit> for Circuit {
    type Error = CircuitError;

    fn try_from(raw: RawCircuit) -> Result<Self> {
        let mut circuit = Circuit::new(raw.num_qubits)?;
        for gate in raw.gates {
            circuit.append(gate.kind, &gate.qubits, gate.angle)?;
        }
        for (qubit, clbit) in raw.measurements {
            circuit.measure(qubit, clbit)?;
        }
        Ok(circuit)
    }
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(CircuitError::NoQubits);
        }
        Ok(Circuit {
            num_qubits,
            gates: Vec::new(),
            measurements: Vec::new(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// `(qubit, clbit)` pairs in the order they were added.
    pub fn measurements(&self) -> &[(usize, usize)] {
        &self.measurements
    }

    pub fn is_measured(&self) -> bool {
        !self.measurements.is_empty()
    }

    /// Number of classical bits addressed, i.e. one past the largest clbit.
    pub fn num_clbits(&self) -> usize {
        self.measurements
            .iter()
            .map(|&(_, c)| c + 1)
            .max()
            .unwrap_or(0)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(CircuitError::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            });
        }
        if self.measurements.iter().any(|&(q, _)| q == qubit) {
            return Err(CircuitError::AlreadyMeasured { qubit });
        }
        Ok(())
    }

    /// Appends a gate. `GateKind::Measure` is routed to [`Circuit::measure`]
    /// with the next free classical bit.
    pub fn append(
        &mut self,
        kind: GateKind,
        qubits: &[usize],
        angle: Option<Angle>,
    ) -> Result<&mut Self> {
        Gate::check(kind, qubits, angle)?;
        if kind == GateKind::Measure {
            let clbit = self.num_clbits();
            return self.measure(qubits[0], clbit);
        }
        for &q in qubits {
            self.check_qubit(q)?;
        }
        self.gates.push(Gate {
            kind,
            qubits: qubits.to_vec(),
            angle,
        });
        Ok(self)
    }

    pub fn measure(&mut self, qubit: usize, clbit: usize) -> Result<&mut Self> {
        self.check_qubit(qubit)?;
        if self.measurements.iter().any(|&(_, c)| c == clbit) {
            return Err(CircuitError::ClbitReused { clbit });
        }
        self.measurements.push((qubit, clbit));
        Ok(self)
    }

    /// Measures qubit `i` into classical bit `i` for every qubit.
    pub fn measure_all(&mut self) -> Result<&mut Self> {
        if self.is_measured() {
            return Err(CircuitError::HasMeasurements);
        }
        for q in 0..self.num_qubits {
            self.measurements.push((q, q));
        }
        Ok(self)
    }

    /// Sorted distinct placeholder indices.
    fn symbols(&self) -> BTreeSet<usize> {
        self.gates
            .iter()
            .filter_map(|g| match g.angle {
                Some(Angle::Symbol(i)) => Some(i),
                _ => None,
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.symbols().len()
    }

    pub fn is_literal(&self) -> bool {
        self.parameter_count() == 0
    }

    /// Returns a copy with every `θ_i` replaced by `theta[i]`.
    pub fn bind_parameters(&self, theta: &[f64]) -> Result<Circuit> {
        let symbols = self.symbols();
        if let Some(missing) = (0..symbols.len()).find(|i| !symbols.contains(i)) {
            return Err(CircuitError::ParameterGap { missing });
        }
        if theta.len() != symbols.len() {
            return Err(CircuitError::ParameterCount {
                expected: symbols.len(),
                got: theta.len(),
            });
        }
        let mut bound = self.clone();
        for gate in &mut bound.gates {
            if let Some(Angle::Symbol(i)) = gate.angle {
                gate.angle = Some(Angle::Literal(theta[i]));
            }
        }
        Ok(bound)
    }

    /// Unmeasured literal circuit implementing the adjoint unitary.
    pub fn inverse(&self) -> Result<Circuit> {
        if self.is_measured() {
            return Err(CircuitError::HasMeasurements);
        }
        let mut inv = Circuit::new(self.num_qubits)?;
        for gate in self.gates.iter().rev() {
            let angle = gate.literal_angle()?;
            let kind = match gate.kind {
                GateKind::S => GateKind::Sdg,
                GateKind::Sdg => GateKind::S,
                GateKind::T => GateKind::Tdg,
                GateKind::Tdg => GateKind::T,
                other => other,
            };
            let angle = kind.is_rotation().then_some(Angle::Literal(-angle));
            inv.append(kind, &gate.qubits, angle)?;
        }
        Ok(inv)
    }

    /// Copy of this circuit with all measurements removed.
    pub fn without_measurements(&self) -> Circuit {
        Circuit {
            measurements: Vec::new(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serialization is infallible")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Circuit> {
        serde_json::from_str(text)
    }
}

/// Builder that grows the qubit count to cover every referenced index.
///
/// ```
/// use qvirt::circuit::CircuitBuilder;
///
/// let mut bell = CircuitBuilder::new();
/// bell.h(0).unwrap();
/// bell.cnot(0, 1).unwrap();
/// bell.measure_all().unwrap();
/// let bell = bell.build().unwrap();
/// assert_eq!(bell.measurements(), &[(0, 0), (1, 1)]);
/// ```
#[derive(Debug, Clone, Default)]
pub struct CircuitBuilder {
    num_qubits: usize,
    gates: Vec<Gate>,
    measurements: Vec<(usize, usize)>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from an existing circuit; further appends may still grow it.
    pub fn from_circuit(circuit: Circuit) -> Self {
        CircuitBuilder {
            num_qubits: circuit.num_qubits,
            gates: circuit.gates,
            measurements: circuit.measurements,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn append(
        &mut self,
        kind: GateKind,
        qubits: &[usize],
        angle: Option<Angle>,
    ) -> Result<&mut Self> {
        Gate::check(kind, qubits, angle)?;
        if let Some(&max) = qubits.iter().max() {
            self.num_qubits = self.num_qubits.max(max + 1);
        }
        // Reuse the circuit's checks on a view with the grown size.
        let mut view = Circuit {
            num_qubits: self.num_qubits,
            gates: std::mem::take(&mut self.gates),
            measurements: std::mem::take(&mut self.measurements),
        };
        let outcome = view.append(kind, qubits, angle).map(|_| ());
        self.gates = view.gates;
        self.measurements = view.measurements;
        outcome.map(|_| self)
    }

    pub fn id(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::I, &[q], None)
    }
    pub fn x(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::X, &[q], None)
    }
    pub fn y(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::Y, &[q], None)
    }
    pub fn z(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::Z, &[q], None)
    }
    pub fn h(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::H, &[q], None)
    }
    pub fn s(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::S, &[q], None)
    }
    pub fn sdg(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::Sdg, &[q], None)
    }
    pub fn t(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::T, &[q], None)
    }
    pub fn tdg(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::Tdg, &[q], None)
    }
    pub fn rx(&mut self, q: usize, angle: Angle) -> Result<&mut Self> {
        self.append(GateKind::RX, &[q], Some(angle))
    }
    pub fn ry(&mut self, q: usize, angle: Angle) -> Result<&mut Self> {
        self.append(GateKind::RY, &[q], Some(angle))
    }
    pub fn rz(&mut self, q: usize, angle: Angle) -> Result<&mut Self> {
        self.append(GateKind::RZ, &[q], Some(angle))
    }
    pub fn cnot(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.append(GateKind::CNOT, &[control, target], None)
    }
    pub fn cz(&mut self, a: usize, b: usize) -> Result<&mut Self> {
        self.append(GateKind::CZ, &[a, b], None)
    }
    pub fn measure(&mut self, q: usize) -> Result<&mut Self> {
        self.append(GateKind::Measure, &[q], None)
    }

    pub fn measure_all(&mut self) -> Result<&mut Self> {
        if !self.measurements.is_empty() {
            return Err(CircuitError::HasMeasurements);
        }
        self.measurements = (0..self.num_qubits).map(|q| (q, q)).collect();
        Ok(self)
    }

    pub fn build(&self) -> Result<Circuit> {
        if self.num_qubits == 0 {
            return Err(CircuitError::NoQubits);
        }
        Ok(Circuit {
            num_qubits: self.num_qubits,
            gates: self.gates.clone(),
            measurements: self.measurements.clone(),
        })
    }
}
