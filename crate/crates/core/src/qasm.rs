//! OpenQASM 2.0 subset frontend.
//!
//! Handles bare programs and the kernel-wrapped form
//! `__qpu__ void NAME(qreg q) { OPENQASM 2.0; ... }`, where the quantum
//! register comes from the signature and is sized by the largest index used.
//! `QBTHETA_<n>` placeholders become [`Angle::Symbol`]`(n)`.

use std::fmt;

use thiserror::Error;

use crate::circuit::{Angle, Circuit, CircuitError, GateKind};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{pos}: {kind}")]
pub struct QasmError {
    pub pos: Position,
    pub kind: QasmErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QasmErrorKind {
    #[error("unexpected character {0:?}")]
    BadChar(char),
    #[error("unterminated string literal")]
    UnterminatedString,
    #[error("expected {expected}, found {found}")]
    Expected { expected: String, found: String },
    #[error("program must start with `OPENQASM 2.0;`")]
    MissingHeader,
    #[error("unsupported OpenQASM version {0}")]
    Version(String),
    #[error("only \"qelib1.inc\" may be included, got {0:?}")]
    Include(String),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("gate `{0}` is not supported; express it with rx/ry/rz")]
    UnsupportedGate(String),
    #[error("`{0}` statements are not supported")]
    UnsupportedStatement(String),
    #[error("register `{0}` declared twice")]
    DuplicateRegister(String),
    #[error("only one {0} register is supported")]
    MultipleRegisters(&'static str),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("index {index} out of bounds for register `{name}` of size {size}")]
    IndexOutOfBounds {
        name: String,
        index: usize,
        size: usize,
    },
    #[error("classical bit {0} is written twice")]
    ClbitReused(usize),
    #[error("`{name}` takes {expected} parameter(s), got {got}")]
    ParamCount {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("parameter placeholders cannot appear inside arithmetic expressions")]
    SymbolInExpression,
    #[error("division by zero in constant expression")]
    DivisionByZero,
    #[error("invalid circuit: {0}")]
    Circuit(#[from] CircuitError),
}

type Result<T> = std::result::Result<T, QasmError>;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(usize),
    Real(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Real(x) => write!(f, "`{x}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const PUNCTS: [&str; 13] = [
    "->", ";", ",", "(", ")", "[", "]", "{", "}", "+", "-", "*", "/",
];

fn lex(src: &str) -> Result<Vec<(Tok, Position)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for k in 0..n {
            if chars[*i + k] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Position { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            let n = chars[i..].iter().take_while(|&&c| c != '\n').count();
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let n = chars[i..]
                .iter()
                .take_while(|c| c.is_ascii_alphanumeric() || **c == '_')
                .count();
            out.push((Tok::Ident(chars[i..i + n].iter().collect()), pos));
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut n = chars[i..].iter().take_while(|c| c.is_ascii_digit()).count();
            let mut real = false;
            if chars.get(i + n) == Some(&'.') {
                real = true;
                n += 1;
                n += chars[i + n..].iter().take_while(|c| c.is_ascii_digit()).count();
            }
            if matches!(chars.get(i + n), Some('e' | 'E')) {
                let mut m = n + 1;
                if matches!(chars.get(i + m), Some('+' | '-')) {
                    m += 1;
                }
                let digits = chars[(i + m).min(chars.len())..]
                    .iter()
                    .take_while(|c| c.is_ascii_digit())
                    .count();
                if digits > 0 {
                    real = true;
                    n = m + digits;
                }
            }
            let text: String = chars[i..i + n].iter().collect();
            let tok = if real {
                Tok::Real(text.parse().map_err(|_| QasmError {
                    pos,
                    kind: QasmErrorKind::BadChar(c),
                })?)
            } else {
                match text.parse() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => Tok::Real(text.parse().unwrap_or(f64::INFINITY)),
                }
            };
            out.push((tok, pos));
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c == '"' {
            let n = chars[i + 1..].iter().take_while(|&&c| c != '"' && c != '\n').count();
            if chars.get(i + 1 + n) != Some(&'"') {
                return Err(QasmError {
                    pos,
                    kind: QasmErrorKind::UnterminatedString,
                });
            }
            out.push((Tok::Str(chars[i + 1..i + 1 + n].iter().collect()), pos));
            advance(&mut i, &mut line, &mut col, n + 2);
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                out.push((Tok::Punct(p), pos));
                advance(&mut i, &mut line, &mut col, p.len());
            }
            None => {
                return Err(QasmError {
                    pos,
                    kind: QasmErrorKind::BadChar(c),
                })
            }
        }
    }
    out.push((Tok::Eof, Position { line, col }));
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum Value {
    Num(f64),
    Sym(usize),
}

fn placeholder_index(name: &str) -> Option<usize> {
    name.strip_prefix("QBTHETA_")?.parse().ok()
}

#[derive(Debug)]
struct Register {
    name: String,
    /// `None` for the kernel-signature register, which has no declared size.
    size: Option<usize>,
}

struct Parser {
    toks: Vec<(Tok, Position)>,
    at: usize,
    qreg: Option<Register>,
    creg: Option<Register>,
    ops: Vec<Op>,
}

enum Op {
    Gate {
        kind: GateKind,
        qubits: Vec<usize>,
        angle: Option<Angle>,
        pos: Position,
    },
    Measure {
        qubit: usize,
        clbit: usize,
        pos: Position,
    },
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Position {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Position) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, kind: QasmErrorKind) -> Result<T> {
        Err(QasmError {
            pos: self.pos(),
            kind,
        })
    }

    fn expected<T>(&self, what: &str) -> Result<T> {
        self.err(QasmErrorKind::Expected {
            expected: what.to_string(),
            found: self.peek().to_string(),
        })
    }

    fn eat(&mut self, punct: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(p) if *p == punct) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, punct: &str) -> Result<()> {
        if self.eat(punct) {
            Ok(())
        } else {
            self.expected(&format!("`{punct}`"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.expected("identifier"),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<()> {
        match self.peek() {
            Tok::Ident(s) if s == word => {
                self.bump();
                Ok(())
            }
            _ => self.expected(&format!("`{word}`")),
        }
    }

    fn int(&mut self) -> Result<usize> {
        match self.peek() {
            Tok::Int(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            _ => self.expected("integer"),
        }
    }

    /// Optional `__qpu__ void NAME(qreg q) {` prefix; returns whether it was present.
    fn kernel_header(&mut self) -> Result<bool> {
        if !matches!(self.peek(), Tok::Ident(s) if s == "__qpu__") {
            return Ok(false);
        }
        self.bump();
        self.keyword("void")?;
        self.ident()?;
        self.expect("(")?;
        self.keyword("qreg")?;
        let name = self.ident()?;
        self.expect(")")?;
        self.expect("{")?;
        self.qreg = Some(Register { name, size: None });
        Ok(true)
    }

    fn header(&mut self) -> Result<()> {
        if !matches!(self.peek(), Tok::Ident(s) if s == "OPENQASM") {
            return self.err(QasmErrorKind::MissingHeader);
        }
        self.bump();
        let pos = self.pos();
        let version = match self.bump().0 {
            Tok::Real(v) => v.to_string(),
            Tok::Int(v) => v.to_string(),
            other => {
                return Err(QasmError {
                    pos,
                    kind: QasmErrorKind::Expected {
                        expected: "version number".into(),
                        found: other.to_string(),
                    },
                })
            }
        };
        if version != "2" {
            return Err(QasmError {
                pos,
                kind: QasmErrorKind::Version(version),
            });
        }
        self.expect(";")
    }

    fn statement(&mut self) -> Result<()> {
        let pos = self.pos();
        let name = self.ident()?;
        match name.as_str() {
            "include" => {
                let file = match self.bump().0 {
                    Tok::Str(s) => s,
                    other => {
                        return Err(QasmError {
                            pos,
                            kind: QasmErrorKind::Expected {
                                expected: "file name".into(),
                                found: other.to_string(),
                            },
                        })
                    }
                };
                if file != "qelib1.inc" {
                    return Err(QasmError {
                        pos,
                        kind: QasmErrorKind::Include(file),
                    });
                }
                self.expect(";")
            }
            "qreg" | "creg" => self.declaration(name == "qreg", pos),
            "measure" => {
                let qubit = self.argument(true)?;
                self.expect("->")?;
                let clbit = self.argument(false)?;
                self.expect(";")?;
                self.ops.push(Op::Measure { qubit, clbit, pos });
                Ok(())
            }
            "gate" | "opaque" | "if" | "barrier" | "reset" => Err(QasmError {
                pos,
                kind: QasmErrorKind::UnsupportedStatement(name),
            }),
            "U" | "CX" | "u0" | "u1" | "u2" | "u3" | "u" | "p" => Err(QasmError {
                pos,
                kind: QasmErrorKind::UnsupportedGate(name),
            }),
            _ => self.gate(name, pos),
        }
    }

    fn declaration(&mut self, quantum: bool, pos: Position) -> Result<()> {
        let name = self.ident()?;
        self.expect("[")?;
        let size = self.int()?;
        self.expect("]")?;
        self.expect(";")?;
        let slot = if quantum { &mut self.qreg } else { &mut self.creg };
        if let Some(existing) = slot {
            let kind = if existing.name == name {
                QasmErrorKind::DuplicateRegister(name)
            } else {
                QasmErrorKind::MultipleRegisters(if quantum { "quantum" } else { "classical" })
            };
            return Err(QasmError { pos, kind });
        }
        *slot = Some(Register {
            name,
            size: Some(size),
        });
        Ok(())
    }

    /// `name[index]`, resolved against the quantum or classical register.
    fn argument(&mut self, quantum: bool) -> Result<usize> {
        let pos = self.pos();
        let name = self.ident()?;
        let register = if quantum { &self.qreg } else { &self.creg };
        let size = match register {
            Some(r) if r.name == name => r.size,
            _ => {
                return Err(QasmError {
                    pos,
                    kind: QasmErrorKind::UnknownRegister(name),
                })
            }
        };
        if !matches!(self.peek(), Tok::Punct("[")) {
            return self.expected("`[` (whole-register arguments are not supported)");
        }
        self.bump();
        let index_pos = self.pos();
        let index = self.int()?;
        self.expect("]")?;
        if let Some(size) = size {
            if index >= size {
                return Err(QasmError {
                    pos: index_pos,
                    kind: QasmErrorKind::IndexOutOfBounds { name, index, size },
                });
            }
        }
        Ok(index)
    }

    fn gate(&mut self, name: String, pos: Position) -> Result<()> {
        let Some(kind) = GateKind::from_qasm_name(&name) else {
            return Err(QasmError {
                pos,
                kind: QasmErrorKind::UnknownGate(name),
            });
        };
        let mut params = Vec::new();
        if self.eat("(") && !self.eat(")") {
            loop {
                params.push(self.angle()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        let expected = usize::from(kind.is_rotation());
        if params.len() != expected {
            return Err(QasmError {
                pos,
                kind: QasmErrorKind::ParamCount {
                    name,
                    expected,
                    got: params.len(),
                },
            });
        }
        let mut qubits = vec![self.argument(true)?];
        while self.eat(",") {
            qubits.push(self.argument(true)?);
        }
        self.expect(";")?;
        self.ops.push(Op::Gate {
            kind,
            qubits,
            angle: params.pop(),
            pos,
        });
        Ok(())
    }

    fn angle(&mut self) -> Result<Angle> {
        Ok(match self.expr()? {
            Value::Num(v) => Angle::Literal(v),
            Value::Sym(i) => Angle::Symbol(i),
        })
    }

    fn num(&self, v: Value, pos: Position) -> Result<f64> {
        match v {
            Value::Num(x) => Ok(x),
            Value::Sym(_) => Err(QasmError {
                pos,
                kind: QasmErrorKind::SymbolInExpression,
            }),
        }
    }

    fn expr(&mut self) -> Result<Value> {
        let pos = self.pos();
        let mut lhs = self.term()?;
        loop {
            let sign = if self.eat("+") {
                1.0
            } else if self.eat("-") {
                -1.0
            } else {
                return Ok(lhs);
            };
            let a = self.num(lhs, pos)?;
            let rhs = self.term()?;
            let b = self.num(rhs, pos)?;
            lhs = Value::Num(a + sign * b);
        }
    }

    fn term(&mut self) -> Result<Value> {
        let pos = self.pos();
        let mut lhs = self.factor()?;
        loop {
            let div = if self.eat("*") {
                false
            } else if self.eat("/") {
                true
            } else {
                return Ok(lhs);
            };
            let a = self.num(lhs, pos)?;
            let rhs_pos = self.pos();
            let rhs = self.factor()?;
            let b = self.num(rhs, pos)?;
            lhs = Value::Num(if div {
                if b == 0.0 {
                    return Err(QasmError {
                        pos: rhs_pos,
                        kind: QasmErrorKind::DivisionByZero,
                    });
                }
                a / b
            } else {
                a * b
            });
        }
    }

    fn factor(&mut self) -> Result<Value> {
        let pos = self.pos();
        if self.eat("-") {
            let v = self.factor()?;
            return Ok(Value::Num(-self.num(v, pos)?));
        }
        if self.eat("+") {
            let v = self.factor()?;
            return Ok(Value::Num(self.num(v, pos)?));
        }
        if self.eat("(") {
            let v = self.expr()?;
            self.expect(")")?;
            return Ok(Value::Num(self.num(v, pos)?));
        }
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Value::Num(n as f64))
            }
            Tok::Real(x) => {
                self.bump();
                Ok(Value::Num(x))
            }
            Tok::Ident(name) if name == "pi" => {
                self.bump();
                Ok(Value::Num(std::f64::consts::PI))
            }
            Tok::Ident(name) => match placeholder_index(&name) {
                Some(i) => {
                    self.bump();
                    Ok(Value::Sym(i))
                }
                None => self.expected("numeric expression"),
            },
            _ => self.expected("numeric expression"),
        }
    }

    fn into_circuit(self, end: Position) -> Result<Circuit> {
        let num_qubits = match &self.qreg {
            Some(Register { size: Some(n), .. }) => *n,
            _ => self
                .ops
                .iter()
                .flat_map(|op| match op {
                    Op::Gate { qubits, .. } => qubits.clone(),
                    Op::Measure { qubit, .. } => vec![*qubit],
                })
                .max()
                .map_or(0, |m| m + 1),
        };
        let mut circuit = Circuit::new(num_qubits).map_err(|e| QasmError {
            pos: end,
            kind: e.into(),
        })?;
        for op in self.ops {
            match op {
                Op::Gate {
                    kind,
                    qubits,
                    angle,
                    pos,
                } => {
                    circuit
                        .append(kind, &qubits, angle)
                        .map_err(|e| QasmError { pos, kind: e.into() })?;
                }
                Op::Measure { qubit, clbit, pos } => {
                    circuit.measure(qubit, clbit).map_err(|e| QasmError {
                        pos,
                        kind: match e {
                            CircuitError::ClbitReused { clbit } => QasmErrorKind::ClbitReused(clbit),
                            other => other.into(),
                        },
                    })?;
                }
            }
        }
        Ok(circuit)
    }
}

/// Parses an OpenQASM 2.0 program (optionally kernel-wrapped) into a circuit.
pub fn parse_qasm(source: &str) -> Result<Circuit> {
    let mut p = Parser {
        toks: lex(source)?,
        at: 0,
        qreg: None,
        creg: None,
        ops: Vec::new(),
    };
    let wrapped = p.kernel_header()?;
    p.header()?;
    loop {
        match p.peek() {
            Tok::Eof if !wrapped => break,
            Tok::Punct("}") if wrapped => {
                p.bump();
                if *p.peek() != Tok::Eof {
                    return p.expected("end of input");
                }
                break;
            }
            Tok::Eof => return p.expected("`}`"),
            _ => p.statement()?,
        }
    }
    let end = p.pos();
    if p.qreg.is_none() {
        return Err(QasmError {
            pos: end,
            kind: QasmErrorKind::Expected {
                expected: "a `qreg` declaration".into(),
                found: "none".into(),
            },
        });
    }
    p.into_circuit(end)
}

/// Renders a circuit as a bare OpenQASM 2.0 program.
///
/// Literal angles use the shortest representation that parses back to the
/// same `f64`, so `parse_qasm(&emit_qasm(c)) == c`.
pub fn emit_qasm(circuit: &Circuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    out += &format!("qreg q[{}];\n", circuit.num_qubits());
    if circuit.is_measured() {
        out += &format!("creg c[{}];\n", circuit.num_clbits());
    }
    for gate in circuit.gates() {
        out += gate.kind.qasm_name();
        match gate.angle {
            Some(Angle::Literal(v)) => out += &format!("({v:?})"),
            Some(Angle::Symbol(i)) => out += &format!("(QBTHETA_{i})"),
            None => {}
        }
        let args: Vec<String> = gate.qubits.iter().map(|q| format!("q[{q}]")).collect();
        out += &format!(" {};\n", args.join(", "));
    }
    for (q, c) in circuit.measurements() {
        out += &format!("measure q[{q}] -> c[{c}];\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;

    pub(crate) const LISTING: &str = r#"
__qpu__ void QBCIRCUIT(qreg q) {
    OPENQASM 2.0;
    include "qelib1.inc";
    creg c[2];
    x q[1];
    ry(QBTHETA_0) q[0];
    cx q[1], q[0];
    measure q[0] -> c[0];
    measure q[1] -> c[1];
}"#;

    fn kind_of(e: QasmError) -> QasmErrorKind {
        e.kind
    }

    #[test]
    fn kernel_wrapped_listing() {
        let c = parse_qasm(LISTING).unwrap();
        assert_eq!(c.num_qubits(), 2);
        let gates: Vec<_> = c.gates().iter().map(|g| (g.kind, g.qubits.clone(), g.angle)).collect();
        assert_eq!(
            gates,
            vec![
                (GateKind::X, vec![1], None),
                (GateKind::RY, vec![0], Some(Angle::Symbol(0))),
                (GateKind::CNOT, vec![1, 0], None),
            ]
        );
        assert_eq!(c.measurements(), &[(0, 0), (1, 1)]);
        assert_eq!(c.parameter_count(), 1);
    }

    #[test]
    fn measure_only() {
        let c = parse_qasm("OPENQASM 2.0; qreg q[1]; creg c[1]; measure q[0]->c[0];").unwrap();
        assert_eq!(c.num_qubits(), 1);
        assert!(c.gates().is_empty());
        assert_eq!(c.measurements(), &[(0, 0)]);
    }

    #[test]
    fn constant_expressions() {
        let cases = [
            ("pi/2", std::f64::consts::FRAC_PI_2),
            ("2*pi", 2.0 * std::f64::consts::PI),
            ("-pi", -std::f64::consts::PI),
            ("-(pi - 1) / 2", -(std::f64::consts::PI - 1.0) / 2.0),
            ("1.5e-3", 1.5e-3),
            (".25", 0.25),
            ("3", 3.0),
        ];
        for (expr, expected) in cases {
            let src = format!("OPENQASM 2.0;\nqreg q[1];\nry({expr}) q[0];");
            let c = parse_qasm(&src).unwrap();
            let Some(Angle::Literal(v)) = c.gates()[0].angle else {
                panic!("{expr} not literal")
            };
            assert!((v - expected).abs() <= 1e-15, "{expr}: {v} vs {expected}");
        }
    }

    #[test]
    fn diagnostics_carry_positions() {
        let err = parse_qasm("OPENQASM 2.0;\nqreg q[1];\nfoo q[0];").unwrap_err();
        assert_eq!(err.pos, Position { line: 3, col: 1 });
        assert_eq!(err.kind, QasmErrorKind::UnknownGate("foo".into()));

        let err = parse_qasm("OPENQASM 2.0;\nqreg q[1];\n  h q[0] $").unwrap_err();
        assert_eq!(err.pos, Position { line: 3, col: 10 });
        assert_eq!(err.kind, QasmErrorKind::BadChar('$'));
    }

    #[test]
    fn rejected_programs() {
        type Check = fn(&QasmErrorKind) -> bool;
        let cases: Vec<(&str, Check)> = vec![
            ("qreg q[1];", |k| matches!(k, QasmErrorKind::MissingHeader)),
            ("OPENQASM 3.0; qreg q[1];", |k| matches!(k, QasmErrorKind::Version(_))),
            ("OPENQASM 2.0; include \"other.inc\"; qreg q[1];", |k| {
                matches!(k, QasmErrorKind::Include(_))
            }),
            ("OPENQASM 2.0; qreg q[1]; u3(0,0,0) q[0];", |k| {
                matches!(k, QasmErrorKind::UnsupportedGate(_))
            }),
            ("OPENQASM 2.0; qreg q[1]; barrier q[0];", |k| {
                matches!(k, QasmErrorKind::UnsupportedStatement(_))
            }),
            ("OPENQASM 2.0; qreg q[2]; x q[2];", |k| {
                matches!(k, QasmErrorKind::IndexOutOfBounds { index: 2, size: 2, .. })
            }),
            ("OPENQASM 2.0; qreg q[2]; qreg q[2];", |k| {
                matches!(k, QasmErrorKind::DuplicateRegister(_))
            }),
            ("OPENQASM 2.0; qreg q[2]; qreg r[2];", |k| {
                matches!(k, QasmErrorKind::MultipleRegisters(_))
            }),
            ("OPENQASM 2.0; qreg q[2]; creg c[2]; measure q[0] -> c[0]; measure q[1] -> c[0];", |k| {
                matches!(k, QasmErrorKind::ClbitReused(0))
            }),
            ("OPENQASM 2.0; qreg q[1]; ry(2*QBTHETA_0) q[0];", |k| {
                matches!(k, QasmErrorKind::SymbolInExpression)
            }),
            ("OPENQASM 2.0; qreg q[1]; ry(-QBTHETA_0) q[0];", |k| {
                matches!(k, QasmErrorKind::SymbolInExpression)
            }),
            ("OPENQASM 2.0; qreg q[1]; ry q[0];", |k| matches!(k, QasmErrorKind::ParamCount { .. })),
            ("OPENQASM 2.0; qreg q[1]; h(0.1) q[0];", |k| matches!(k, QasmErrorKind::ParamCount { .. })),
            ("OPENQASM 2.0; qreg q[1]; h r[0];", |k| matches!(k, QasmErrorKind::UnknownRegister(_))),
            ("OPENQASM 2.0; qreg q[2]; cx q[0], q[0];", |k| {
                matches!(k, QasmErrorKind::Circuit(CircuitError::RepeatedQubit { .. }))
            }),
            ("OPENQASM 2.0; qreg q[1]; ry(1/0) q[0];", |k| matches!(k, QasmErrorKind::DivisionByZero)),
            ("OPENQASM 2.0; qreg q[1]; h q;", |k| matches!(k, QasmErrorKind::Expected { .. })),
            ("__qpu__ void K(qreg q) { OPENQASM 2.0; h q[0];", |k| {
                matches!(k, QasmErrorKind::Expected { .. })
            }),
        ];
        for (src, check) in cases {
            let err = parse_qasm(src).map(|_| ()).unwrap_err();
            assert!(check(&err.kind), "{src}: got {err}");
        }
        assert!(matches!(
            kind_of(parse_qasm("OPENQASM 2.0; include \"qelib1.inc").unwrap_err()),
            QasmErrorKind::UnterminatedString
        ));
    }

    #[test]
    fn emit_bell() {
        let mut b = CircuitBuilder::new();
        b.h(0).unwrap().cnot(0, 1).unwrap().measure_all().unwrap();
        let text = emit_qasm(&b.build().unwrap());
        let h = text.find("h q[0];").unwrap();
        let cx = text.find("cx q[0], q[1];").unwrap();
        assert!(h < cx);
    }

    #[test]
    fn emit_symbol_round_trips() {
        let mut b = CircuitBuilder::new();
        b.ry(0, Angle::Symbol(3)).unwrap();
        b.ry(0, Angle::Symbol(0)).unwrap();
        let c = b.build().unwrap();
        let text = emit_qasm(&c);
        assert!(text.contains("QBTHETA_3"));
        assert_eq!(parse_qasm(&text).unwrap(), c);
    }

    #[test]
    fn listing_round_trip() {
        let c = parse_qasm(LISTING).unwrap();
        assert_eq!(parse_qasm(&emit_qasm(&c)).unwrap(), c);
    }
}
