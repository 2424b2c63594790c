//! Circuit IR, the line-oriented `.mq` text format, and static validation.
//!
//! ```text
//! qubits N            register width
//! input Q,...         designated classical-input register (optional)
//! h Q | x Q | ccx C1 C2 T
//! measure Q...        computational-basis measurement
//! postselect Q        projector onto |1>
//! corr [Q,..] [Q,..]  correlated measurement; first group leads
//! noncollapse Q...    non-collapsing sample
//! query I,... out T   oracle query |i,b> -> |i, b xor x_i>
//! call NAME in Q,... out Q
//! sub NAME ... endsub subroutine definition
//! output Q
//! report P,...        transcript bit positions to report (optional)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};

pub type Qubit = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CircuitOp {
    Hadamard(Qubit),
    X(Qubit),
    Toffoli(Qubit, Qubit, Qubit),
    Measure(Vec<Qubit>),
    Postselect(Qubit),
    /// Partition 0 is the leader.
    CorrMeasure(Vec<Vec<Qubit>>),
    NonCollapse(Vec<Qubit>),
    SubCall {
        name: String,
        inputs: Vec<Qubit>,
        output: Qubit,
    },
    /// `target ^= x[index]`, index register read most-significant first.
    OracleQuery { index: Vec<Qubit>, target: Qubit },
}

impl CircuitOp {
    /// Number of transcript bits this op records.
    pub fn recorded_bits(&self) -> usize {
        match self {
            CircuitOp::Measure(qs) | CircuitOp::NonCollapse(qs) => qs.len(),
            CircuitOp::Postselect(_) | CircuitOp::SubCall { .. } => 1,
            CircuitOp::CorrMeasure(parts) => parts.iter().map(Vec::len).sum(),
            _ => 0,
        }
    }

    /// Every qubit the op addresses, in operand order.
    pub fn qubits(&self) -> Vec<Qubit> {
        match self {
            CircuitOp::Hadamard(q) | CircuitOp::X(q) | CircuitOp::Postselect(q) => vec![*q],
            CircuitOp::Toffoli(a, b, c) => vec![*a, *b, *c],
            CircuitOp::Measure(qs) | CircuitOp::NonCollapse(qs) => qs.clone(),
            CircuitOp::CorrMeasure(parts) => parts.concat(),
            CircuitOp::SubCall { inputs, output, .. } => {
                let mut v = inputs.clone();
                v.push(*output);
                v
            }
            CircuitOp::OracleQuery { index, target } => {
                let mut v = index.clone();
                v.push(*target);
                v
            }
        }
    }

    /// Qubits that stop being quantum after this op.
    pub fn consumed(&self) -> Vec<Qubit> {
        match self {
            CircuitOp::Measure(qs) => qs.clone(),
            CircuitOp::Postselect(q) => vec![*q],
            CircuitOp::CorrMeasure(parts) => parts.concat(),
            _ => Vec::new(),
        }
    }

    /// Applies `f` to every qubit operand.
    pub fn remap(&self, f: impl Fn(Qubit) -> Qubit) -> CircuitOp {
        let all = |qs: &[Qubit]| qs.iter().map(|&q| f(q)).collect::<Vec<_>>();
        match self {
            CircuitOp::Hadamard(q) => CircuitOp::Hadamard(f(*q)),
            CircuitOp::X(q) => CircuitOp::X(f(*q)),
            CircuitOp::Toffoli(a, b, c) => CircuitOp::Toffoli(f(*a), f(*b), f(*c)),
            CircuitOp::Measure(qs) => CircuitOp::Measure(all(qs)),
            CircuitOp::Postselect(q) => CircuitOp::Postselect(f(*q)),
            CircuitOp::CorrMeasure(parts) => {
                CircuitOp::CorrMeasure(parts.iter().map(|p| all(p)).collect())
            }
            CircuitOp::NonCollapse(qs) => CircuitOp::NonCollapse(all(qs)),
            CircuitOp::SubCall {
                name,
                inputs,
                output,
            } => CircuitOp::SubCall {
                name: name.clone(),
                inputs: all(inputs),
                output: f(*output),
            },
            CircuitOp::OracleQuery { index, target } => CircuitOp::OracleQuery {
                index: all(index),
                target: f(*target),
            },
        }
    }
}

fn list(qs: &[Qubit]) -> String {
    qs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for CircuitOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spaced = |qs: &[Qubit]| qs.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        match self {
            CircuitOp::Hadamard(q) => write!(f, "h {q}"),
            CircuitOp::X(q) => write!(f, "x {q}"),
            CircuitOp::Toffoli(a, b, c) => write!(f, "ccx {a} {b} {c}"),
            CircuitOp::Measure(qs) => write!(f, "measure {}", spaced(qs)),
            CircuitOp::Postselect(q) => write!(f, "postselect {q}"),
            CircuitOp::CorrMeasure(parts) => {
                write!(f, "corr")?;
                for p in parts {
                    write!(f, " [{}]", list(p))?;
                }
                Ok(())
            }
            CircuitOp::NonCollapse(qs) => write!(f, "noncollapse {}", spaced(qs)),
            CircuitOp::SubCall {
                name,
                inputs,
                output,
            } => write!(f, "call {name} in {} out {output}", list(inputs)),
            CircuitOp::OracleQuery { index, target } => {
                write!(f, "query {} out {target}", list(index))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    pub width: usize,
    pub ops: Vec<CircuitOp>,
    pub output: Qubit,
    /// Qubits that receive the classical input `x` as an X-gate prefix.
    pub inputs: Vec<Qubit>,
    /// Raw transcript positions to report, in order. `None` reports all.
    pub report: Option<Vec<usize>>,
    /// Subroutines callable by name; only the top-level circuit owns a table.
    pub subroutines: BTreeMap<String, Circuit>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit {
            width,
            ops: Vec::new(),
            output: 0,
            inputs: Vec::new(),
            report: None,
            subroutines: BTreeMap::new(),
        }
    }

    pub fn with_ops(width: usize, ops: Vec<CircuitOp>, output: Qubit) -> Self {
        Circuit {
            ops,
            output,
            ..Circuit::new(width)
        }
    }

    pub fn push(&mut self, op: CircuitOp) -> &mut Self {
        self.ops.push(op);
        self
    }

    /// Allocates a fresh qubit at the end of the register file.
    pub fn alloc(&mut self) -> Qubit {
        self.width += 1;
        self.width - 1
    }

    /// True when no op consumes the output qubit, so the simulator measures
    /// it after the last op.
    pub fn measures_output_at_end(&self) -> bool {
        !self.ops.iter().any(|op| op.consumed().contains(&self.output))
    }

    /// Offset of each op's recorded bits in the raw transcript, followed by
    /// the offset of the implicit final output measurement.
    pub fn transcript_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.ops.len() + 1);
        let mut at = 0;
        for op in &self.ops {
            offsets.push(at);
            at += op.recorded_bits();
        }
        offsets.push(at);
        offsets
    }

    pub fn raw_transcript_len(&self) -> usize {
        let body: usize = self.ops.iter().map(CircuitOp::recorded_bits).sum();
        body + usize::from(self.measures_output_at_end())
    }

    /// Positions of the raw transcript that make up the reported transcript.
    pub fn reported_positions(&self) -> Vec<usize> {
        match &self.report {
            Some(r) => r.clone(),
            None => (0..self.raw_transcript_len()).collect(),
        }
    }

    pub fn query_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, CircuitOp::OracleQuery { .. }))
            .count()
    }

    /// Looks up a subroutine body, first in this circuit's table, then in
    /// `root`'s.
    pub fn subroutine<'a>(&'a self, root: &'a Circuit, name: &str) -> Option<&'a Circuit> {
        self.subroutines
            .get(name)
            .or_else(|| root.subroutines.get(name))
    }
}

/// Static Hadamard count, with each subroutine call counted as the
/// subroutine body's own count.
pub fn count_hadamards(circuit: &Circuit) -> usize {
    fn go(c: &Circuit, root: &Circuit, depth: usize) -> usize {
        if depth > root.subroutines.len() + 1 {
            return 0;
        }
        c.ops
            .iter()
            .map(|op| match op {
                CircuitOp::Hadamard(_) => 1,
                CircuitOp::SubCall { name, .. } => c
                    .subroutine(root, name)
                    .map(|s| go(s, root, depth + 1))
                    .unwrap_or(0),
                _ => 0,
            })
            .sum()
    }
    go(circuit, circuit, 0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationKind {
    QubitOutOfRange(Qubit),
    DuplicateQubit(Qubit),
    ClassicalRegister(Qubit),
    EmptyOperandList,
    PartitionsNotDisjoint,
    PartitionsNotEquisized,
    UnknownSubroutine(String),
    CyclicSubroutine(String),
    ArityMismatch { expected: usize, got: usize },
    QuantumSubroutineInput(Qubit),
    NestedSubroutineTable,
    ReportOutOfRange(usize),
    OutputOutOfRange(Qubit),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationError {
    /// Op index, or `None` for circuit-level problems.
    pub op: Option<usize>,
    /// Subroutine the problem was found in, if any.
    pub scope: Option<String>,
    pub kind: ValidationKind,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationKind::*;
        match &self.kind {
            QubitOutOfRange(q) => write!(f, "qubit index {q} out of range")?,
            DuplicateQubit(q) => write!(f, "duplicate qubit {q} within one op")?,
            ClassicalRegister(q) => write!(f, "quantum op on classical register {q}")?,
            EmptyOperandList => write!(f, "empty operand list")?,
            PartitionsNotDisjoint => write!(f, "partitions not disjoint")?,
            PartitionsNotEquisized => write!(f, "partitions not equisized")?,
            UnknownSubroutine(n) => write!(f, "unknown subroutine {n:?}")?,
            CyclicSubroutine(n) => write!(f, "cyclic subroutine reference through {n:?}")?,
            ArityMismatch { expected, got } => {
                write!(f, "subroutine takes {expected} inputs, call passes {got}")?
            }
            QuantumSubroutineInput(q) => {
                write!(f, "subroutine input {q} is not a classical register")?
            }
            NestedSubroutineTable => write!(f, "subroutines cannot define subroutines")?,
            ReportOutOfRange(p) => write!(f, "report position {p} past transcript end")?,
            OutputOutOfRange(q) => write!(f, "output qubit {q} out of range")?,
        }
        if let Some(op) = self.op {
            write!(f, " (op {op})")?;
        }
        if let Some(s) = &self.scope {
            write!(f, " in sub {s}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant. An empty list means the circuit is
/// well formed.
pub fn validate(circuit: &Circuit) -> Vec<ValidationError> {
    let mut errors = validate_body(circuit, circuit, None);
    for (name, sub) in &circuit.subroutines {
        if !sub.subroutines.is_empty() {
            errors.push(ValidationError {
                op: None,
                scope: Some(name.clone()),
                kind: ValidationKind::NestedSubroutineTable,
            });
        }
        errors.extend(validate_body(sub, circuit, Some(name)));
    }
    errors.extend(check_call_cycles(circuit));
    errors
}

pub fn ensure_valid(circuit: &Circuit) -> Result<()> {
    let errors = validate(circuit);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(errors))
    }
}

fn validate_body(c: &Circuit, root: &Circuit, scope: Option<&String>) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    macro_rules! err {
        ($op:expr, $kind:expr) => {
            errors.push(ValidationError {
                op: $op,
                scope: scope.cloned(),
                kind: $kind,
            })
        };
    }
    let mut classical = vec![false; c.width];

    if c.output >= c.width {
        err!(None, ValidationKind::OutputOutOfRange(c.output));
    }
    let mut seen = BTreeSet::new();
    for &q in &c.inputs {
        if q >= c.width {
            err!(None, ValidationKind::QubitOutOfRange(q));
        } else if !seen.insert(q) {
            err!(None, ValidationKind::DuplicateQubit(q));
        }
    }

    for (i, op) in c.ops.iter().enumerate() {
        let at = Some(i);
        let qubits = op.qubits();
        let mut bad_index = false;
        for &q in &qubits {
            if q >= c.width {
                err!(at, ValidationKind::QubitOutOfRange(q));
                bad_index = true;
            }
        }
        if bad_index {
            continue;
        }
        let mut seen = BTreeSet::new();
        for &q in &qubits {
            if !seen.insert(q) {
                err!(at, ValidationKind::DuplicateQubit(q));
            }
        }
        macro_rules! need_quantum {
            ($q:expr, $classical:expr) => {
                if $classical[$q] {
                    err!(at, ValidationKind::ClassicalRegister($q));
                }
            };
        }
        match op {
            CircuitOp::Hadamard(q) | CircuitOp::X(q) | CircuitOp::Postselect(q) => {
                need_quantum!(*q, &classical)
            }
            CircuitOp::Toffoli(_, _, t) => need_quantum!(*t, &classical),
            CircuitOp::OracleQuery { index, target } => {
                if index.is_empty() {
                    err!(at, ValidationKind::EmptyOperandList);
                }
                need_quantum!(*target, &classical);
            }
            CircuitOp::Measure(qs) | CircuitOp::NonCollapse(qs) => {
                if qs.is_empty() {
                    err!(at, ValidationKind::EmptyOperandList);
                }
                for &q in qs {
                    need_quantum!(q, &classical);
                }
            }
            CircuitOp::CorrMeasure(parts) => {
                if parts.is_empty() || parts.iter().any(Vec::is_empty) {
                    err!(at, ValidationKind::EmptyOperandList);
                }
                if parts.iter().any(|p| p.len() != parts[0].len()) {
                    err!(at, ValidationKind::PartitionsNotEquisized);
                }
                let total: usize = parts.iter().map(Vec::len).sum();
                let distinct: BTreeSet<_> = parts.iter().flatten().collect();
                if distinct.len() != total {
                    err!(at, ValidationKind::PartitionsNotDisjoint);
                }
                for &q in parts.iter().flatten() {
                    need_quantum!(q, &classical);
                }
            }
            CircuitOp::SubCall {
                name,
                inputs,
                output,
            } => {
                match c.subroutine(root, name) {
                    None => err!(at, ValidationKind::UnknownSubroutine(name.clone())),
                    Some(sub) if sub.inputs.len() != inputs.len() => {
                        err!(
                            at,
                            ValidationKind::ArityMismatch {
                                expected: sub.inputs.len(),
                                got: inputs.len(),
                            }
                        );
                    }
                    Some(_) => {}
                }
                for &q in inputs {
                    if !classical[q] {
                        err!(at, ValidationKind::QuantumSubroutineInput(q));
                    }
                }
                need_quantum!(*output, &classical);
            }
        }
        for q in op.consumed() {
            classical[q] = true;
        }
    }

    if let Some(report) = &c.report {
        let len = c.raw_transcript_len();
        for &p in report {
            if p >= len {
                err!(None, ValidationKind::ReportOutOfRange(p));
            }
        }
    }
    errors
}

fn check_call_cycles(root: &Circuit) -> Vec<ValidationError> {
    fn callees(c: &Circuit) -> BTreeSet<&str> {
        c.ops
            .iter()
            .filter_map(|op| match op {
                CircuitOp::SubCall { name, .. } => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }
    // Depth-first search with colors over the subroutine table.
    fn visit<'a>(
        name: &'a str,
        root: &'a Circuit,
        state: &mut BTreeMap<&'a str, u8>,
        cyclic: &mut BTreeSet<String>,
    ) {
        match state.get(name) {
            Some(1) => {
                cyclic.insert(name.to_string());
                return;
            }
            Some(_) => return,
            None => {}
        }
        state.insert(name, 1);
        if let Some(sub) = root.subroutines.get(name) {
            for callee in callees(sub) {
                visit(callee, root, state, cyclic);
            }
        }
        state.insert(name, 2);
    }
    let mut state = BTreeMap::new();
    let mut cyclic = BTreeSet::new();
    for name in root.subroutines.keys() {
        visit(name, root, &mut state, &mut cyclic);
    }
    cyclic
        .into_iter()
        .map(|n| ValidationError {
            op: None,
            scope: None,
            kind: ValidationKind::CyclicSubroutine(n),
        })
        .collect()
}

/// Parses and validates a circuit in the `.mq` text format.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let circuit = Parser::new(text).parse()?;
    ensure_valid(&circuit)?;
    Ok(circuit)
}

/// Parses without validating, for tools that want the full error list.
pub fn parse_unvalidated(text: &str) -> Result<Circuit> {
    Parser::new(text).parse()
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

#[derive(Default)]
struct Draft {
    width: Option<usize>,
    ops: Vec<CircuitOp>,
    output: Option<Qubit>,
    inputs: Vec<Qubit>,
    report: Option<Vec<usize>>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Parser { lines, pos: 0 }
    }

    fn parse(mut self) -> Result<Circuit> {
        let mut subs = BTreeMap::new();
        let draft = self.body(false, &mut subs)?;
        let last_line = self.lines.last().map(|l| l.0).unwrap_or(1);
        let mut c = finish(draft, last_line)?;
        c.subroutines = subs;
        Ok(c)
    }

    fn body(&mut self, in_sub: bool, subs: &mut BTreeMap<String, Circuit>) -> Result<Draft> {
        let mut d = Draft::default();
        while self.pos < self.lines.len() {
            let (line, text) = self.lines[self.pos];
            self.pos += 1;
            let syntax = |message: String| Error::Syntax { line, message };
            let (head, rest) = match text.split_once(char::is_whitespace) {
                Some((h, r)) => (h, r.trim()),
                None => (text, ""),
            };
            match head {
                "endsub" if in_sub => return Ok(d),
                "endsub" => return Err(syntax("endsub without sub".into())),
                "sub" if in_sub => return Err(syntax("nested sub definition".into())),
                "sub" => {
                    let name = single_name(rest).map_err(syntax)?;
                    let start = line;
                    let inner = self.body(true, subs)?;
                    let c = finish(inner, start)?;
                    if subs.insert(name.clone(), c).is_some() {
                        return Err(syntax(format!("duplicate sub {name:?}")));
                    }
                }
                "qubits" => {
                    if d.width.is_some() {
                        return Err(syntax("qubits declared twice".into()));
                    }
                    d.width = Some(number(rest).map_err(syntax)?);
                }
                "output" => d.output = Some(number(rest).map_err(syntax)?),
                "input" => d.inputs = qubit_list(rest).map_err(syntax)?,
                "report" => d.report = Some(qubit_list(rest).map_err(syntax)?),
                _ => d.ops.push(parse_op(head, rest).map_err(syntax)?),
            }
        }
        if in_sub {
            let line = self.lines.last().map(|l| l.0).unwrap_or(1);
            return Err(Error::Syntax {
                line,
                message: "sub without endsub".into(),
            });
        }
        Ok(d)
    }
}

fn finish(d: Draft, line: usize) -> Result<Circuit> {
    let width = d.width.ok_or(Error::Syntax {
        line,
        message: "missing `qubits N` declaration".into(),
    })?;
    Ok(Circuit {
        width,
        ops: d.ops,
        output: d.output.unwrap_or(0),
        inputs: d.inputs,
        report: d.report,
        subroutines: BTreeMap::new(),
    })
}

fn number(s: &str) -> std::result::Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("expected a non-negative integer, found {s:?}"))
}

fn single_name(s: &str) -> std::result::Result<String, String> {
    let valid = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if valid {
        Ok(s.to_string())
    } else {
        Err(format!("bad subroutine name {s:?}"))
    }
}

fn qubit_list(s: &str) -> std::result::Result<Vec<Qubit>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(number)
        .collect()
}

fn exactly<const N: usize>(s: &str, op: &str) -> std::result::Result<[Qubit; N], String> {
    let qs = qubit_list(s)?;
    qs.try_into()
        .map_err(|_| format!("`{op}` takes exactly {N} qubit(s)"))
}

/// Splits a space-padded string around the standalone token `key`.
fn keyword_split<'s>(padded: &'s str, key: &str) -> Option<(&'s str, &'s str)> {
    let idx = padded.find(&format!(" {key} "))?;
    Some((&padded[..idx], &padded[idx + key.len() + 2..]))
}

fn parse_op(head: &str, rest: &str) -> std::result::Result<CircuitOp, String> {
    Ok(match head {
        "h" => CircuitOp::Hadamard(exactly::<1>(rest, head)?[0]),
        "x" => CircuitOp::X(exactly::<1>(rest, head)?[0]),
        "ccx" => {
            let [a, b, c] = exactly::<3>(rest, head)?;
            CircuitOp::Toffoli(a, b, c)
        }
        "measure" => CircuitOp::Measure(qubit_list(rest)?),
        "postselect" => CircuitOp::Postselect(exactly::<1>(rest, head)?[0]),
        "noncollapse" => CircuitOp::NonCollapse(qubit_list(rest)?),
        "corr" => CircuitOp::CorrMeasure(partitions(rest)?),
        "call" => {
            let (name, tail) = rest
                .split_once(char::is_whitespace)
                .ok_or("expected `call NAME in Q,... out Q`")?;
            let tail = format!(" {} ", tail.trim());
            let (ins, out) = keyword_split(&tail, "out").ok_or("missing `out Q`")?;
            let ins = ins.trim();
            let ins = ins.strip_prefix("in").ok_or("missing `in Q,...`")?;
            CircuitOp::SubCall {
                name: single_name(name)?,
                inputs: qubit_list(ins)?,
                output: exactly::<1>(out, "out")?[0],
            }
        }
        "query" => {
            let padded = format!(" {} ", rest);
            let (index, out) = keyword_split(&padded, "out").ok_or("missing `out T`")?;
            CircuitOp::OracleQuery {
                index: qubit_list(index)?,
                target: exactly::<1>(out, "out")?[0],
            }
        }
        other => return Err(format!("unknown instruction {other:?}")),
    })
}

fn partitions(s: &str) -> std::result::Result<Vec<Vec<Qubit>>, String> {
    let mut parts = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let inner = rest
            .strip_prefix('[')
            .ok_or_else(|| format!("expected `[`, found {rest:?}"))?;
        let close = inner.find(']').ok_or("unclosed `[`")?;
        parts.push(qubit_list(&inner[..close])?);
        rest = inner[close + 1..].trim_start();
    }
    if parts.is_empty() {
        return Err("`corr` needs at least one partition".into());
    }
    Ok(parts)
}

/// Renders a circuit in the `.mq` format; `parse_circuit` inverts it.
pub fn render_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    render_body(c, &mut out, "");
    out
}

fn render_body(c: &Circuit, out: &mut String, indent: &str) {
    let _ = writeln!(out, "{indent}qubits {}", c.width);
    if !c.inputs.is_empty() {
        let _ = writeln!(out, "{indent}input {}", list(&c.inputs));
    }
    for (name, sub) in &c.subroutines {
        let _ = writeln!(out, "sub {name}");
        render_body(sub, out, "  ");
        let _ = writeln!(out, "endsub");
    }
    for op in &c.ops {
        let _ = writeln!(out, "{indent}{op}");
    }
    let _ = writeln!(out, "{indent}output {}", c.output);
    if let Some(r) = &c.report {
        let _ = writeln!(out, "{indent}report {}", list(r));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CircuitOp::*;

    #[test]
    fn parses_minimal_circuit() {
        let c = parse_circuit("qubits 1\nh 0\nmeasure 0\noutput 0").unwrap();
        assert_eq!(c, Circuit::with_ops(1, vec![Hadamard(0), Measure(vec![0])], 0));
    }

    #[test]
    fn rejects_overlapping_partitions() {
        let err = parse_circuit("qubits 2\ncorr [0] [0]").unwrap_err();
        assert!(err.to_string().contains("partitions not disjoint"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_circuit("qubits 4\nh 0\ncx-like via toffoli 0 1").unwrap_err();
        match err {
            Error::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_circuit("# header\n\nqubits 2\nh 0 1").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 4, .. }));
        assert!(matches!(
            parse_circuit("h 0"),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn validate_examples() {
        let ghz = Circuit::with_ops(
            3,
            vec![X(2), Hadamard(0), Toffoli(0, 2, 1), CorrMeasure(vec![vec![0], vec![1]])],
            0,
        );
        assert!(validate(&ghz).is_empty());

        let reuse = Circuit::with_ops(1, vec![Measure(vec![0]), Hadamard(0)], 0);
        let errs = validate(&reuse);
        assert_eq!(errs.len(), 1);
        assert!(errs[0].to_string().contains("quantum op on classical register"));

        let lopsided = Circuit::with_ops(3, vec![CorrMeasure(vec![vec![0, 1], vec![2]])], 0);
        let errs = validate(&lopsided);
        assert!(errs
            .iter()
            .any(|e| e.kind == ValidationKind::PartitionsNotEquisized));
    }

    #[test]
    fn corr_on_classical_register_is_rejected() {
        let c = Circuit::with_ops(2, vec![Measure(vec![0]), CorrMeasure(vec![vec![0], vec![1]])], 1);
        assert!(validate(&c)
            .iter()
            .any(|e| e.kind == ValidationKind::ClassicalRegister(0)));
    }

    #[test]
    fn out_of_range_and_duplicates() {
        let c = Circuit::with_ops(2, vec![Toffoli(0, 0, 1), X(5)], 3);
        let kinds: Vec<_> = validate(&c).into_iter().map(|e| e.kind).collect();
        assert!(kinds.contains(&ValidationKind::DuplicateQubit(0)));
        assert!(kinds.contains(&ValidationKind::QubitOutOfRange(5)));
        assert!(kinds.contains(&ValidationKind::OutputOutOfRange(3)));
    }

    #[test]
    fn subroutines_parse_and_validate() {
        let text = "\
qubits 3
sub ident
  qubits 1
  input 0
  output 0
endsub
x 0
measure 0
call ident in 0 out 1
output 1
";
        let c = parse_circuit(text).unwrap();
        assert_eq!(c.subroutines["ident"].inputs, vec![0]);
        assert_eq!(parse_circuit(&render_circuit(&c)).unwrap(), c);

        // Input not yet classical.
        let bad = text.replace("measure 0\n", "");
        let err = parse_circuit(&bad).unwrap_err();
        assert!(err.to_string().contains("not a classical register"), "{err}");
    }

    #[test]
    fn cyclic_calls_are_rejected() {
        let text = "\
qubits 2
sub a
  qubits 2
  input 0
  measure 0
  call b in 0 out 1
  output 1
endsub
sub b
  qubits 2
  input 0
  measure 0
  call a in 0 out 1
  output 1
endsub
output 0
";
        let err = parse_circuit(text).unwrap_err();
        assert!(err.to_string().contains("cyclic"), "{err}");
    }

    #[test]
    fn count_hadamards_examples() {
        let c = Circuit::with_ops(3, vec![Hadamard(0), Toffoli(0, 1, 2), Hadamard(0)], 0);
        assert_eq!(count_hadamards(&c), 2);
        assert_eq!(count_hadamards(&Circuit::new(1)), 0);
    }

    #[test]
    fn transcript_layout() {
        let c = parse_circuit(
            "qubits 4\nh 0\nmeasure 0 1\npostselect 2\ncorr [3] \noutput 3\nreport 0,3",
        )
        .unwrap();
        assert_eq!(c.transcript_offsets(), vec![0, 0, 2, 3, 4]);
        assert!(!c.measures_output_at_end());
        assert_eq!(c.raw_transcript_len(), 4);
        assert_eq!(c.reported_positions(), vec![0, 3]);
        let bad = parse_circuit("qubits 1\nreport 1\n").unwrap_err();
        assert!(bad.to_string().contains("report position"), "{bad}");
    }

    #[test]
    fn query_op_round_trips() {
        let c = parse_circuit("qubits 3\nh 0\nh 1\nquery 0,1 out 2\noutput 2").unwrap();
        assert_eq!(
            c.ops[2],
            OracleQuery {
                index: vec![0, 1],
                target: 2
            }
        );
        assert_eq!(c.query_count(), 1);
        assert_eq!(parse_circuit(&render_circuit(&c)).unwrap(), c);
    }
}
