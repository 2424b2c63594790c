//! Circuit-to-circuit compilers.
//!
//! Every pass rewrites the op list and records where each raw transcript bit
//! of the source ends up in the compiled circuit's raw transcript. The
//! compiled circuit's `report` list is set from that map, so the source and
//! compiled circuits produce distributions over the same reported
//! transcripts and can be compared key by key.

use std::collections::BTreeMap;

use crate::circuit::{ensure_valid, Circuit, CircuitOp, Qubit};
use crate::error::{Error, Result};

/// Output buffer for a pass.
struct Emitter {
    out: Circuit,
    cursor: usize,
}

impl Emitter {
    fn new(src: &Circuit) -> Self {
        Emitter {
            out: Circuit {
                ops: Vec::new(),
                report: None,
                ..src.clone()
            },
            cursor: 0,
        }
    }

    fn alloc(&mut self) -> Qubit {
        self.out.alloc()
    }

    fn alloc_block(&mut self, n: usize) -> Qubit {
        let base = self.out.width;
        self.out.width += n;
        base
    }

    /// Appends `op`; returns the raw offset of its recorded bits.
    fn emit(&mut self, op: CircuitOp) -> usize {
        let at = self.cursor;
        self.cursor += op.recorded_bits();
        self.out.ops.push(op);
        at
    }

    fn cnot(&mut self, one: Qubit, c: Qubit, t: Qubit) {
        self.emit(CircuitOp::Toffoli(one, c, t));
    }

    /// Sets the report list from `map` (source raw position to compiled raw
    /// position). Source positions mapped to `None` are dropped. The
    /// implicit final output measurement maps across automatically when
    /// both circuits have one and the pass left it unset.
    fn finish(mut self, src: &Circuit, mut map: Vec<Option<usize>>) -> Circuit {
        if src.measures_output_at_end() && self.out.measures_output_at_end() {
            let last = map.len() - 1;
            map[last].get_or_insert(self.cursor);
        }
        let report: Vec<usize> = src
            .reported_positions()
            .into_iter()
            .filter_map(|p| map[p])
            .collect();
        let identity = report.len() == self.out.raw_transcript_len()
            && report.iter().enumerate().all(|(i, &p)| i == p);
        self.out.report = (!identity).then_some(report);
        self.out
    }
}

fn copy_op(e: &mut Emitter, map: &mut [Option<usize>], offset: usize, op: &CircuitOp) {
    let at = e.emit(op.clone());
    for b in 0..op.recorded_bits() {
        map[offset + b] = Some(at + b);
    }
}

fn map_subroutines(c: &mut Circuit, pass: impl Fn(&Circuit) -> Circuit) {
    let subs: BTreeMap<String, Circuit> = c
        .subroutines
        .iter()
        .map(|(k, v)| (k.clone(), pass(v)))
        .collect();
    c.subroutines = subs;
}

/// Replaces each `postselect q` by a fresh leader `f` prepared in `|1>` and
/// `corr [f] [q]`.
pub fn compile_postselect_to_corr(c: &Circuit) -> Circuit {
    let offs = c.transcript_offsets();
    let mut map = vec![None; c.raw_transcript_len()];
    let mut e = Emitter::new(c);
    for (i, op) in c.ops.iter().enumerate() {
        match op {
            CircuitOp::Postselect(q) => {
                let f = e.alloc();
                e.emit(CircuitOp::X(f));
                let at = e.emit(CircuitOp::CorrMeasure(vec![vec![f], vec![*q]]));
                map[offs[i]] = Some(at);
            }
            _ => copy_op(&mut e, &mut map, offs[i], op),
        }
    }
    let mut out = e.finish(c, map);
    map_subroutines(&mut out, compile_postselect_to_corr);
    out
}

/// Postselections as in [`compile_postselect_to_corr`]; every measurement,
/// including the implicit final one, becomes `corr [q] [f]` against a fresh
/// `|+>` qubit `f`.
pub fn compile_adpost_to_corr(c: &Circuit) -> Circuit {
    let offs = c.transcript_offsets();
    let mut map = vec![None; c.raw_transcript_len()];
    let mut e = Emitter::new(c);
    let gadget = |e: &mut Emitter, q: Qubit| {
        let f = e.alloc();
        e.emit(CircuitOp::Hadamard(f));
        e.emit(CircuitOp::CorrMeasure(vec![vec![q], vec![f]]))
    };
    for (i, op) in c.ops.iter().enumerate() {
        match op {
            CircuitOp::Postselect(q) => {
                let f = e.alloc();
                e.emit(CircuitOp::X(f));
                let at = e.emit(CircuitOp::CorrMeasure(vec![vec![f], vec![*q]]));
                map[offs[i]] = Some(at);
            }
            CircuitOp::Measure(qs) => {
                for (b, &q) in qs.iter().enumerate() {
                    map[offs[i] + b] = Some(gadget(&mut e, q));
                }
            }
            _ => copy_op(&mut e, &mut map, offs[i], op),
        }
    }
    if c.measures_output_at_end() {
        let last = map.len() - 1;
        map[last] = Some(gadget(&mut e, c.output));
    }
    let mut out = e.finish(c, map);
    map_subroutines(&mut out, compile_adpost_to_corr);
    out
}

/// Simulates non-collapsing measurements with parallel copies.
///
/// With `P` non-collapsing ops, copy 0 runs the whole circuit and copy `i`
/// (for `i` in `1..=P`) runs only the ops before the `i`-th non-collapsing
/// op. A measurement made after `p` non-collapsing ops is a correlated
/// measurement across copy 0 and the copies that have not stopped yet, led
/// by copy `P` while it is active. At the end each stopped copy measures the
/// qubits its non-collapsing op would have sampled.
///
/// `postprocess`, if given, is a circuit whose `inputs` receive the
/// concatenated samples; its output qubit becomes the compiled output.
pub fn compile_pdqp_to_corr(c: &Circuit, postprocess: Option<&Circuit>) -> Result<Circuit> {
    ensure_valid(c)?;
    let w = c.width;
    let nc_ops: Vec<usize> = c
        .ops
        .iter()
        .enumerate()
        .filter(|(_, op)| matches!(op, CircuitOp::NonCollapse(_)))
        .map(|(i, _)| i)
        .collect();
    let p_total = nc_ops.len();
    if let Some(post) = postprocess {
        let bits: usize = nc_ops.iter().map(|&i| c.ops[i].recorded_bits()).sum();
        if post.inputs.len() != bits {
            return Err(Error::Domain(format!(
                "postprocess circuit takes {} inputs, samples have {bits} bits",
                post.inputs.len()
            )));
        }
    }
    let offs = c.transcript_offsets();
    let mut map = vec![None; c.raw_transcript_len()];
    let mut e = Emitter::new(c);
    e.out.width = w * (p_total + 1);
    let at_copy = |copy: usize, q: Qubit| copy * w + q;
    let needs_one = (p_total > 0 && !c.inputs.is_empty()) || postprocess.is_some();
    let one = needs_one.then(|| e.alloc());
    if let Some(one) = one {
        e.emit(CircuitOp::X(one));
    }
    if p_total > 0 {
        for copy in 1..=p_total {
            for &q in &c.inputs {
                e.cnot(one.unwrap(), q, at_copy(copy, q));
            }
        }
    }
    let mut seen = 0;
    for (i, op) in c.ops.iter().enumerate() {
        let active: Vec<usize> = std::iter::once(0).chain(seen + 1..=p_total).collect();
        match op {
            CircuitOp::NonCollapse(_) => seen += 1,
            CircuitOp::Measure(qs) => {
                let mut order = active.clone();
                if order.len() > 1 {
                    // Leader is the last copy still running.
                    order.rotate_right(1);
                }
                let parts: Vec<Vec<Qubit>> = order
                    .iter()
                    .map(|&k| qs.iter().map(|&q| at_copy(k, q)).collect())
                    .collect();
                let at = e.emit(CircuitOp::CorrMeasure(parts));
                for b in 0..qs.len() {
                    map[offs[i] + b] = Some(at + b);
                }
            }
            CircuitOp::Hadamard(_)
            | CircuitOp::X(_)
            | CircuitOp::Toffoli(..)
            | CircuitOp::OracleQuery { .. } => {
                for &k in &active {
                    e.emit(op.remap(|q| at_copy(k, q)));
                }
            }
            other => {
                return Err(Error::Domain(format!(
                    "op {i} ({other}) is not allowed in a non-collapsing circuit"
                )))
            }
        }
    }
    let mut sample_qubits = Vec::new();
    for (k, &i) in nc_ops.iter().enumerate() {
        let CircuitOp::NonCollapse(qs) = &c.ops[i] else {
            unreachable!()
        };
        let frozen: Vec<Qubit> = qs.iter().map(|&q| at_copy(k + 1, q)).collect();
        let at = e.emit(CircuitOp::Measure(frozen.clone()));
        for b in 0..qs.len() {
            map[offs[i] + b] = Some(at + b);
        }
        sample_qubits.extend(frozen);
    }
    if let Some(post) = postprocess {
        if c.measures_output_at_end() {
            let at = e.emit(CircuitOp::Measure(vec![c.output]));
            let last = map.len() - 1;
            map[last] = Some(at);
        }
        let base = e.alloc_block(post.width);
        let one = one.unwrap();
        for (&s, &pin) in sample_qubits.iter().zip(&post.inputs) {
            e.cnot(one, s, base + pin);
        }
        for op in &post.ops {
            e.emit(op.remap(|q| base + q));
        }
        e.out.output = base + post.output;
    }
    Ok(e.finish(c, map))
}

/// `m` sequential copies on disjoint registers, each measured, followed by a
/// majority vote into a fresh output. The result reports only the vote.
///
/// The vote uses a one-hot counter: each measured bit shifts the hot
/// position up by one through controlled swaps, and the output is the XOR of
/// the counter positions at or above the threshold.
pub fn amplify(c: &Circuit, m: usize) -> Result<Circuit> {
    if m % 2 == 0 {
        return Err(Error::Domain(format!("repetition count must be odd, got {m}")));
    }
    ensure_valid(c)?;
    let w = c.width;
    let mut out = Circuit {
        ops: Vec::new(),
        report: None,
        ..c.clone()
    };
    out.width = m * w;
    let one = out.alloc();
    let counter: Vec<Qubit> = (0..=m).map(|_| out.alloc()).collect();
    let vote = out.alloc();
    let ccx = |a, b, t| CircuitOp::Toffoli(a, b, t);
    out.push(CircuitOp::X(one));
    for k in 1..m {
        for &q in &c.inputs {
            out.push(ccx(one, q, k * w + q));
        }
    }
    let mut votes = Vec::with_capacity(m);
    for k in 0..m {
        for op in &c.ops {
            out.push(op.remap(|q| k * w + q));
        }
        let o = k * w + c.output;
        if c.measures_output_at_end() {
            out.push(CircuitOp::Measure(vec![o]));
        }
        votes.push(o);
    }
    out.push(CircuitOp::X(counter[0]));
    for (k, &v) in votes.iter().enumerate() {
        for j in (0..=k).rev() {
            let (a, b) = (counter[j], counter[j + 1]);
            out.push(ccx(one, b, a));
            out.push(ccx(v, a, b));
            out.push(ccx(one, b, a));
        }
    }
    for &cj in &counter[(m + 1) / 2..] {
        out.push(ccx(one, cj, vote));
    }
    out.output = vote;
    out.report = Some(vec![out.raw_transcript_len() - 1]);
    Ok(out)
}

/// Replaces every subroutine call by an inline copy of the subroutine,
/// amplified `m` times, fed from a Toffoli fan-out of the classical call
/// inputs. The vote is measured and copied onto the call's output register.
pub fn inline_subcalls(c: &Circuit, m: usize) -> Result<Circuit> {
    ensure_valid(c)?;
    let mut out = inline_body(c, c, m)?;
    out.subroutines.clear();
    Ok(out)
}

fn inline_body(root: &Circuit, body: &Circuit, m: usize) -> Result<Circuit> {
    let offs = body.transcript_offsets();
    let mut map = vec![None; body.raw_transcript_len()];
    let mut e = Emitter::new(body);
    let mut one = None;
    for (i, op) in body.ops.iter().enumerate() {
        let CircuitOp::SubCall {
            name,
            inputs,
            output,
        } = op
        else {
            copy_op(&mut e, &mut map, offs[i], op);
            continue;
        };
        let sub = body
            .subroutine(root, name)
            .ok_or_else(|| Error::Domain(format!("unknown subroutine {name}")))?;
        let flat = inline_body(root, sub, m)?;
        let amp = amplify(&Circuit { subroutines: BTreeMap::new(), ..flat }, m)?;
        let one = *one.get_or_insert_with(|| {
            let q = e.alloc();
            e.emit(CircuitOp::X(q));
            q
        });
        let base = e.alloc_block(amp.width);
        for (&b, &ai) in inputs.iter().zip(&amp.inputs) {
            e.cnot(one, b, base + ai);
        }
        for aop in &amp.ops {
            e.emit(aop.remap(|q| base + q));
        }
        let at = e.emit(CircuitOp::Measure(vec![base + amp.output]));
        map[offs[i]] = Some(at);
        e.cnot(one, base + amp.output, *output);
    }
    Ok(e.finish(body, map))
}

/// Removes the first `measure` op. Its bits leave the transcript and its
/// qubits stay quantum.
pub fn elide_first_measurement(c: &Circuit) -> Result<Circuit> {
    let first = c
        .ops
        .iter()
        .position(|op| matches!(op, CircuitOp::Measure(_)))
        .ok_or_else(|| Error::Domain("circuit has no measurement to elide".into()))?;
    let offs = c.transcript_offsets();
    let mut map = vec![None; c.raw_transcript_len()];
    let mut e = Emitter::new(c);
    for (i, op) in c.ops.iter().enumerate() {
        if i != first {
            copy_op(&mut e, &mut map, offs[i], op);
        }
    }
    if c.measures_output_at_end() != e.out.measures_output_at_end() {
        // The elided op measured the output; the compiled circuit now
        // measures it at the end instead.
        let last = e.out.raw_transcript_len() - 1;
        let mut out = e.finish(c, map);
        let mut report = out.reported_positions();
        report.push(last);
        out.report = Some(report);
        ensure_valid(&out)?;
        return Ok(out);
    }
    let out = e.finish(c, map);
    ensure_valid(&out)?;
    Ok(out)
}

/// A pass name as accepted by the command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pass {
    PostToCorr,
    AdPostToCorr,
    PdqpToCorr,
    Amplify(usize),
    Inline(usize),
    Elide,
}

impl std::str::FromStr for Pass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let count = |a: Option<&str>| -> Result<usize> {
            a.ok_or_else(|| Error::Parse(format!("pass {name} needs a count, e.g. {name}:3")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad count in pass {s}")))
        };
        Ok(match name {
            "post2corr" => Pass::PostToCorr,
            "adpost2corr" => Pass::AdPostToCorr,
            "pdqp2corr" => Pass::PdqpToCorr,
            "amplify" => Pass::Amplify(count(arg)?),
            "inline" => Pass::Inline(count(arg)?),
            "elide" => Pass::Elide,
            _ => return Err(Error::Parse(format!("unknown pass {s}"))),
        })
    }
}

pub fn apply_pass(c: &Circuit, pass: &Pass) -> Result<Circuit> {
    match pass {
        Pass::PostToCorr => Ok(compile_postselect_to_corr(c)),
        Pass::AdPostToCorr => Ok(compile_adpost_to_corr(c)),
        Pass::PdqpToCorr => compile_pdqp_to_corr(c, None),
        Pass::Amplify(m) => amplify(c, *m),
        Pass::Inline(m) => inline_subcalls(c, *m),
        Pass::Elide => elide_first_measurement(c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{parse_circuit, validate};
    use crate::gen::{random_circuit, GenConfig};
    use crate::numeric::Rational;
    use crate::simulator::{run_exhaustive, OutcomeDistribution};

    fn run(c: &Circuit) -> Result<OutcomeDistribution> {
        assert!(validate(c).is_empty(), "{:?}\n{}", validate(c), crate::render_circuit(c));
        run_exhaustive(c, &[])
    }

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn same_outcome(a: &Result<OutcomeDistribution>, b: &Result<OutcomeDistribution>) -> bool {
        match (a, b) {
            (Ok(x), Ok(y)) => x == y,
            (Err(_), Err(_)) => true,
            _ => false,
        }
    }

    #[test]
    fn post2corr_forces_one() {
        let c = parse_circuit("qubits 1\nh 0\npostselect 0\noutput 0\n").unwrap();
        let d = run(&compile_postselect_to_corr(&c)).unwrap();
        assert_eq!(d.prob("1"), Rational::one());
        assert_eq!(d, run(&c).unwrap());
    }

    #[test]
    fn post2corr_fails_where_source_fails() {
        let c = parse_circuit("qubits 1\npostselect 0\noutput 0\n").unwrap();
        assert!(matches!(run(&c), Err(Error::InvalidPostselection { op: 0 })));
        assert!(matches!(
            run(&compile_postselect_to_corr(&c)),
            Err(Error::InvalidCorrelatedMeasurement { op: 1 })
        ));
    }

    #[test]
    fn adpost_measure_gadget() {
        let c = parse_circuit("qubits 1\nh 0\nmeasure 0\noutput 0\n").unwrap();
        let d = run(&compile_adpost_to_corr(&c)).unwrap();
        assert_eq!(d.prob("0"), r("1/2"));
        assert_eq!(d.prob("1"), r("1/2"));
    }

    #[test]
    fn adpost_adaptive() {
        // Flip q1 when q0 measured 1, then postselect on q1 OR q2.
        let src = "qubits 5\nx 4\nh 0\nmeasure 0\nh 2\nccx 4 0 1\nccx 4 1 3\nccx 4 2 3\nccx 1 2 3\npostselect 3\noutput 2\n";
        let c = parse_circuit(src).unwrap();
        let d = run(&c).unwrap();
        assert_eq!(d, run(&compile_adpost_to_corr(&c)).unwrap());
        assert_eq!(d.output_one, r("3/4"));
    }

    #[test]
    fn random_postselect_and_adaptive() {
        let cfg = GenConfig::gates(4, 10).with_measure().with_postselect();
        for seed in 0..200 {
            let c = random_circuit(&cfg, seed);
            let src = run(&c);
            assert!(same_outcome(&src, &run(&compile_postselect_to_corr(&c))), "post2corr seed {seed}");
            assert!(same_outcome(&src, &run(&compile_adpost_to_corr(&c))), "adpost seed {seed}");
        }
    }

    #[test]
    fn pdqp_single_sample() {
        let c = parse_circuit("qubits 1\nh 0\nnoncollapse 0\noutput 0\n").unwrap();
        let compiled = compile_pdqp_to_corr(&c, None).unwrap();
        assert_eq!(compiled.width, 2);
        assert_eq!(run(&c).unwrap(), run(&compiled).unwrap());
    }

    #[test]
    fn pdqp_intervening_measure() {
        let src = "qubits 3\nx 2\nh 0\nnoncollapse 0\nh 1\nmeasure 1\nccx 1 2 0\nh 0\nnoncollapse 0\nh 0\noutput 0\n";
        let c = parse_circuit(src).unwrap();
        assert_eq!(run(&c).unwrap(), run(&compile_pdqp_to_corr(&c, None).unwrap()).unwrap());
    }

    #[test]
    fn pdqp_without_samples_is_identity() {
        let c = parse_circuit("qubits 2\nh 0\nmeasure 0\noutput 1\n").unwrap();
        let compiled = compile_pdqp_to_corr(&c, None).unwrap();
        assert_eq!(compiled.width, 2);
        assert_eq!(run(&c).unwrap(), run(&compiled).unwrap());
    }

    #[test]
    fn pdqp_random() {
        let cfg = GenConfig::gates(3, 10).with_measure().with_noncollapse(3);
        for seed in 0..200 {
            let c = random_circuit(&cfg, seed);
            let compiled = compile_pdqp_to_corr(&c, None).unwrap();
            assert_eq!(run(&c).unwrap(), run(&compiled).unwrap(), "seed {seed}");
        }
    }

    #[test]
    fn pdqp_postprocess_parity() {
        // Output is the parity of two independent samples of |+>.
        let c = parse_circuit("qubits 1\nh 0\nnoncollapse 0\nnoncollapse 0\noutput 0\n").unwrap();
        let post = parse_circuit("qubits 4\ninput 0,1\nx 3\nccx 3 0 2\nccx 3 1 2\noutput 2\n").unwrap();
        let compiled = compile_pdqp_to_corr(&c, Some(&post)).unwrap();
        let d = run(&compiled).unwrap();
        assert_eq!(d.output_one, r("1/2"));
        let src = run(&c).unwrap();
        assert_eq!(d.entries, src.entries);
    }

    fn two_thirds() -> Circuit {
        // Accepts unless both coins read 1 ... conditioned so p = 2/3.
        let src = "qubits 4\nh 0\nh 1\nx 3\nccx 3 0 2\nccx 3 1 2\nccx 0 1 2\npostselect 2\nx 0\nccx 0 1 3\noutput 3\n";
        parse_circuit(src).unwrap()
    }

    #[test]
    fn amplify_two_thirds() {
        let c = two_thirds();
        assert_eq!(run(&c).unwrap().output_one, r("2/3"));
        assert_eq!(run(&amplify(&c, 3).unwrap()).unwrap().output_one, r("20/27"));
        assert_eq!(run(&amplify(&c, 5).unwrap()).unwrap().output_one, r("64/81"));
        assert_eq!(run(&amplify(&c, 1).unwrap()).unwrap().output_one, r("2/3"));
    }

    #[test]
    fn amplify_half_and_deterministic() {
        let c = parse_circuit("qubits 1\nh 0\noutput 0\n").unwrap();
        assert_eq!(run(&amplify(&c, 3).unwrap()).unwrap().output_one, r("1/2"));
        let c = parse_circuit("qubits 1\nx 0\noutput 0\n").unwrap();
        let d = run(&amplify(&c, 5).unwrap()).unwrap();
        assert_eq!(d.prob("1"), Rational::one());
        assert!(amplify(&c, 2).is_err());
    }

    #[test]
    fn amplify_with_inputs() {
        let c = parse_circuit("qubits 3\ninput 0,1\nccx 0 1 2\noutput 2\n").unwrap();
        let a = amplify(&c, 3).unwrap();
        for (x, want) in [([true, true], 1), ([true, false], 0)] {
            let p = run_exhaustive(&a, &x).unwrap().output_one;
            assert_eq!(p, Rational::from(want));
        }
    }

    #[test]
    fn inline_identity_and_amplified() {
        let src = "qubits 2\nsub id\nqubits 3\ninput 0\nx 2\nccx 2 0 1\noutput 1\nendsub\nx 0\nmeasure 0\ncall id in 0 out 1\noutput 1\n";
        let c = parse_circuit(src).unwrap();
        let flat = inline_subcalls(&c, 1).unwrap();
        assert!(flat.subroutines.is_empty());
        assert_eq!(run(&c).unwrap(), run(&flat).unwrap());
        assert_eq!(run(&flat).unwrap().output_one, Rational::one());

        let mut host = Circuit::new(2);
        host.subroutines.insert("t".into(), two_thirds());
        host.subroutines.get_mut("t").unwrap().inputs = vec![];
        host.push(CircuitOp::SubCall {
            name: "t".into(),
            inputs: vec![],
            output: 1,
        });
        host.output = 1;
        assert_eq!(run(&host).unwrap().output_one, r("2/3"));
        let flat = inline_subcalls(&host, 3).unwrap();
        assert_eq!(run(&flat).unwrap().output_one, r("20/27"));
    }

    #[test]
    fn inline_chained_calls() {
        // not(coin) fed into a copy: P[out=1] = P[coin=0] = 1/2, composed by hand.
        let src = "qubits 4\n\
            sub coin\nqubits 1\nh 0\noutput 0\nendsub\n\
            sub neg\nqubits 3\ninput 0\nx 2\nx 1\nccx 2 0 1\noutput 1\nendsub\n\
            call coin in  out 1\nmeasure 1\ncall neg in 1 out 2\nmeasure 2\noutput 2\n";
        let c = parse_circuit(src).unwrap();
        let d = run(&c).unwrap();
        assert_eq!(d.prob("0011"), r("1/2"));
        assert_eq!(d.prob("1100"), r("1/2"));
        let flat = inline_subcalls(&c, 1).unwrap();
        assert_eq!(d, run(&flat).unwrap());
    }

    #[test]
    fn elide_on_exact_circuit() {
        let c = parse_circuit("qubits 3\nh 0\nmeasure 0\nx 2\nccx 2 0 1\nccx 2 0 1\nx 1\noutput 1\n").unwrap();
        let e = elide_first_measurement(&c).unwrap();
        assert_eq!(run(&c).unwrap().output_only(), run(&e).unwrap().output_only());
        // Nothing after the measurement: elision then end-measure is identical.
        let c = parse_circuit("qubits 1\nh 0\nmeasure 0\noutput 0\n").unwrap();
        let e = elide_first_measurement(&c).unwrap();
        assert_eq!(run(&c).unwrap(), run(&e).unwrap());
    }

    #[test]
    fn elide_changes_bounded_error_circuit() {
        // Measured: the q0 = 0 branch keeps weight 1/2 after its local
        // postselection. Unmeasured: conditioning on q0 OR q1 gives 2/3.
        let src = "qubits 4\nx 3\nh 0\nmeasure 0\nh 1\nccx 3 0 2\nccx 3 1 2\nccx 0 1 2\npostselect 2\noutput 0\n";
        let c = parse_circuit(src).unwrap();
        let e = elide_first_measurement(&c).unwrap();
        assert_eq!(run(&c).unwrap().output_one, r("1/2"));
        assert_eq!(run(&e).unwrap().output_one, r("2/3"));
    }

    #[test]
    fn elide_needs_a_measurement() {
        let c = parse_circuit("qubits 1\nh 0\noutput 0\n").unwrap();
        assert!(elide_first_measurement(&c).is_err());
    }

    #[test]
    fn pass_names() {
        assert_eq!("amplify:3".parse::<Pass>().unwrap(), Pass::Amplify(3));
        assert!("amplify".parse::<Pass>().unwrap_err().is_usage());
        assert!("nope".parse::<Pass>().is_err());
    }
}
