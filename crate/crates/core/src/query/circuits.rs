//! Query circuits and the polynomials hidden in their acceptance
//! probabilities.
//!
//! `Q(x)` is the raw probability that every postselection succeeds and
//! `P(x)` the raw probability that they succeed and the output reads 1.
//! Both are computed from the unnormalized state, so their degree is at
//! most twice the number of queries.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::poly::{format_bits, interpolate_multilinear, point, MultilinearPoly, RationalFunction};
use super::tree::RationalTree;
use crate::circuit::{ensure_valid, Circuit, CircuitOp, Qubit};
use crate::error::{Error, Result};
use crate::numeric::Rational;
use crate::simulator::apply_gate;
use crate::state::ExactState;

/// Largest input length handled by exhaustive extraction.
pub const MAX_INPUT_BITS: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryCircuit {
    pub circuit: Circuit,
    /// Oracle length.
    pub n: usize,
}

impl QueryCircuit {
    /// Accepts circuits built from H, X, Toffoli, oracle queries,
    /// postselection and single-qubit measurements, with no classical input.
    pub fn new(circuit: Circuit, n: usize) -> Result<Self> {
        ensure_valid(&circuit)?;
        if n > MAX_INPUT_BITS {
            return Err(Error::Limit(format!("oracle length {n} exceeds {MAX_INPUT_BITS}")));
        }
        if !circuit.inputs.is_empty() {
            return Err(Error::Domain("query circuits take no classical input".into()));
        }
        for (i, op) in circuit.ops.iter().enumerate() {
            let ok = matches!(
                op,
                CircuitOp::Hadamard(_)
                    | CircuitOp::X(_)
                    | CircuitOp::Toffoli(..)
                    | CircuitOp::OracleQuery { .. }
                    | CircuitOp::Postselect(_)
                    | CircuitOp::Measure(_)
            );
            if !ok {
                return Err(Error::Domain(format!("op {i} ({op}) is not allowed in a query circuit")));
            }
        }
        Ok(QueryCircuit { circuit, n })
    }

    pub fn queries(&self) -> usize {
        self.circuit.query_count()
    }

    pub fn measurements(&self) -> usize {
        self.circuit
            .ops
            .iter()
            .filter(|op| matches!(op, CircuitOp::Measure(_)))
            .count()
    }
}

/// `(P(x), Q(x))` for a circuit without intermediate measurements.
pub fn raw_masses(circuit: &Circuit, x: &[bool]) -> Result<(Rational, Rational)> {
    let mut state = ExactState::new(circuit.width);
    for (i, op) in circuit.ops.iter().enumerate() {
        if apply_gate(&mut state, op, x).map_err(|e| e.at_op(i))? {
            continue;
        }
        match op {
            CircuitOp::Postselect(q) => state.project(&[*q], &[true]).map_err(|e| e.at_op(i))?,
            _ => {
                return Err(Error::Domain(format!(
                    "op {i} ({op}) is not a gate or postselection"
                )))
            }
        }
    }
    let q = state.mass();
    let p = match state.classical_value(circuit.output) {
        Some(true) => q.clone(),
        Some(false) => Rational::zero(),
        None => {
            let mut s = state.clone();
            s.project(&[circuit.output], &[true])?;
            s.mass()
        }
    };
    Ok((p, q))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AcceptPolys {
    pub p: MultilinearPoly,
    pub q: MultilinearPoly,
    pub queries: usize,
}

impl AcceptPolys {
    pub fn function(&self) -> Result<RationalFunction> {
        RationalFunction::new(self.p.clone(), self.q.clone())
    }
}

/// Interpolates `P` and `Q` from exact simulation on every input.
pub fn query_accept_polys(qc: &QueryCircuit) -> Result<AcceptPolys> {
    if qc.measurements() > 0 {
        return Err(Error::Domain(
            "intermediate measurement present; build a tree instead".into(),
        ));
    }
    let (p, q) = polys_of(&qc.circuit, qc.n)?;
    let t = qc.queries();
    for (name, poly) in [("P", &p), ("Q", &q)] {
        if poly.degree() > 2 * t {
            return Err(Error::Invariant(format!(
                "{name} has degree {} with {t} queries",
                poly.degree()
            )));
        }
    }
    Ok(AcceptPolys { p, q, queries: t })
}

fn polys_of(circuit: &Circuit, n: usize) -> Result<(MultilinearPoly, MultilinearPoly)> {
    let mut ps = Vec::with_capacity(1 << n);
    let mut qs = Vec::with_capacity(1 << n);
    for idx in 0..1usize << n {
        let x = point(idx, n);
        let (p, q) = raw_masses(circuit, &x)?;
        if q.is_zero() {
            return Err(Error::Domain(format!(
                "postselection has zero probability at x={}",
                format_bits(&x)
            )));
        }
        ps.push(p);
        qs.push(q);
    }
    Ok((interpolate_multilinear(&ps)?, interpolate_multilinear(&qs)?))
}

/// Splits measurements of several qubits into consecutive single-qubit
/// measurements.
fn split_measures(ops: &[CircuitOp]) -> Vec<CircuitOp> {
    ops.iter()
        .flat_map(|op| match op {
            CircuitOp::Measure(qs) => qs.iter().map(|&q| CircuitOp::Measure(vec![q])).collect(),
            other => vec![other.clone()],
        })
        .collect()
}

/// Rational tree whose value at `x` is the circuit's acceptance probability.
///
/// The first measurement of `m` splits the circuit. The node is
/// `Pr[m = 1 | postselections so far]`. Child `i` is the rest of the
/// circuit started from `|0..0>` with `m` set to `i`, which requires the rest
/// to leave every other qubit touched before the split alone. Children
/// recurse on later measurements.
pub fn tree_from_adaptive_circuit(qc: &QueryCircuit) -> Result<RationalTree> {
    let ops = split_measures(&qc.circuit.ops);
    let tree = build(&qc.circuit, &ops, qc.n)?;
    let t = qc.queries();
    if tree.degree() > 2 * t {
        return Err(Error::Invariant(format!(
            "tree degree {} exceeds twice the {t} queries",
            tree.degree()
        )));
    }
    Ok(tree)
}

fn build(template: &Circuit, ops: &[CircuitOp], n: usize) -> Result<RationalTree> {
    let Some(split) = ops.iter().position(|op| matches!(op, CircuitOp::Measure(_))) else {
        let c = Circuit::with_ops(template.width, ops.to_vec(), template.output);
        let (p, q) = polys_of(&c, n)?;
        return Ok(RationalTree::leaf(RationalFunction::new(p, q)?));
    };
    let CircuitOp::Measure(qs) = &ops[split] else { unreachable!() };
    let m = qs[0];
    let prefix = Circuit::with_ops(template.width, ops[..split].to_vec(), m);
    let (p, q) = polys_of(&prefix, n)?;
    let node = RationalFunction::new(p, q)?;

    let mut dirty: BTreeSet<Qubit> = ops[..split].iter().flat_map(CircuitOp::qubits).collect();
    dirty.remove(&m);
    let rest = &ops[split + 1..];
    for (i, op) in rest.iter().enumerate() {
        if let Some(q) = op.qubits().into_iter().find(|q| dirty.contains(q)) {
            return Err(Error::Domain(format!(
                "cannot split at the measurement of {m}: later op {i} ({op}) uses qubit {q} from before it"
            )));
        }
    }
    if dirty.contains(&template.output) {
        return Err(Error::Domain(format!(
            "cannot split at the measurement of {m}: output {} was used before it",
            template.output
        )));
    }
    let mut children = Vec::with_capacity(2);
    for bit in [false, true] {
        let mut child_ops = Vec::with_capacity(rest.len() + 1);
        if bit {
            child_ops.push(CircuitOp::X(m));
        }
        child_ops.extend_from_slice(rest);
        let child = match build(template, &child_ops, n) {
            Ok(t) => t,
            Err(e) => {
                // Children the coin never selects may be ill formed.
                let reachable = (0..1usize << n).any(|idx| {
                    let r = node.eval(&point(idx, n)).clamp_unit();
                    if bit { !r.is_zero() } else { !r.is_one() }
                });
                if reachable {
                    return Err(e);
                }
                RationalTree::leaf(RationalFunction::constant(n, Rational::zero()))
            }
        };
        children.push(child);
    }
    let one = children.pop().expect("two children");
    let zero = children.pop().expect("two children");
    Ok(RationalTree::node(node, zero, one))
}

/// Shape of a random query circuit.
#[derive(Clone, Debug)]
pub struct QueryGenConfig {
    pub n: usize,
    pub queries: usize,
    /// Gates between queries.
    pub gates: usize,
    pub postselect: bool,
    /// One intermediate measurement whose outcome controls the second half.
    pub adaptive: bool,
}

fn index_bits(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

/// A block of `index_bits(n) + 3` qubits: index register, query target and
/// two work qubits starting at `base`.
fn random_block<R: Rng>(
    cfg: &QueryGenConfig,
    queries: usize,
    base: usize,
    control: Option<Qubit>,
    rng: &mut R,
) -> (Vec<CircuitOp>, Vec<Qubit>) {
    let k = index_bits(cfg.n);
    let qubits: Vec<Qubit> = (base..base + k + 3).collect();
    let index = qubits[..k].to_vec();
    let mut ops = Vec::new();
    let gates = |ops: &mut Vec<CircuitOp>, rng: &mut R| {
        for _ in 0..cfg.gates {
            let op = match rng.gen_range(0..4) {
                0 | 1 => CircuitOp::Hadamard(*qubits.choose(rng).unwrap()),
                2 => CircuitOp::X(*qubits.choose(rng).unwrap()),
                _ => {
                    let mut pick = qubits.clone();
                    pick.shuffle(rng);
                    let a = match control {
                        Some(c) if rng.gen_bool(0.5) => c,
                        _ => pick[2],
                    };
                    CircuitOp::Toffoli(a, pick[1], pick[0])
                }
            };
            ops.push(op);
        }
    };
    for q in &index {
        ops.push(CircuitOp::Hadamard(*q));
    }
    for _ in 0..queries {
        gates(&mut ops, rng);
        let target = qubits[k + rng.gen_range(0..3)];
        ops.push(CircuitOp::OracleQuery {
            index: index.clone(),
            target,
        });
    }
    gates(&mut ops, rng);
    (ops, qubits)
}

/// Random valid query circuit with exactly `cfg.queries` queries.
/// Postselection may fail on some inputs; callers retry.
pub fn random_query_circuit<R: Rng>(cfg: &QueryGenConfig, rng: &mut R) -> QueryCircuit {
    let k = index_bits(cfg.n);
    let block = k + 3;
    let (ops, out_pool) = if cfg.adaptive {
        let first = rng.gen_range(0..=cfg.queries);
        let (mut a, qa) = random_block(cfg, first, 0, None, rng);
        let m = *qa.choose(rng).unwrap();
        if cfg.postselect && rng.gen_bool(0.5) {
            let p = *qa.iter().filter(|&&q| q != m).collect::<Vec<_>>().choose(rng).unwrap();
            a.push(CircuitOp::Postselect(*p));
        }
        a.push(CircuitOp::Measure(vec![m]));
        let (b, qb) = random_block(cfg, cfg.queries - first, block, Some(m), rng);
        a.extend(b);
        (a, qb)
    } else {
        random_block(cfg, cfg.queries, 0, None, rng)
    };
    let width = if cfg.adaptive { 2 * block } else { block };
    let mut ops = ops;
    let output = *out_pool.choose(rng).unwrap();
    if cfg.postselect {
        let pool: Vec<Qubit> = out_pool.iter().copied().filter(|&q| q != output).collect();
        ops.push(CircuitOp::Postselect(*pool.choose(rng).unwrap()));
    }
    let circuit = Circuit::with_ops(width, ops, output);
    QueryCircuit::new(circuit, cfg.n).expect("generated query circuits are valid")
}
