//! Exact branching simulation.
//!
//! A run starts from `|0...0>` with the classical input written onto the
//! circuit's input qubits, then walks the ops. Ops that produce classical
//! information (measurement, correlated measurement, non-collapsing samples,
//! native subroutine calls) split a branch into children weighted by their
//! conditional probability. Postselection conditions the branch it occurs in:
//! the branch weight is unchanged and the state is left unnormalized.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{ensure_valid, Circuit, CircuitOp, Qubit};
use crate::error::{Error, Result};
use crate::numeric::Rational;
use crate::rng;
use crate::state::{unpack, ExactState};

#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Worker threads for branch expansion; 1 runs on the calling thread.
    pub jobs: usize,
    pub max_branches: usize,
    pub max_live_qubits: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            jobs: 1,
            max_branches: 1 << 20,
            max_live_qubits: 24,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub state: ExactState,
    /// Probability of this branch's transcript so far.
    pub weight: Rational,
    pub transcript: Vec<bool>,
}

/// Applies a unitary op in place. Returns `false` for non-unitary ops,
/// which are left untouched.
pub fn apply_gate(state: &mut ExactState, op: &CircuitOp, oracle: &[bool]) -> Result<bool> {
    match op {
        CircuitOp::Hadamard(q) => state.apply_h(*q)?,
        CircuitOp::X(q) => state.apply_x(*q)?,
        CircuitOp::Toffoli(a, b, c) => state.apply_toffoli(*a, *b, *c)?,
        CircuitOp::OracleQuery { index, target } => state.apply_query(index, *target, oracle)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Outcomes of measuring `q` as `(bit, post-measurement state, probability)`,
/// zero-probability outcomes omitted.
pub fn measure(state: &ExactState, q: Qubit) -> Result<Vec<(bool, ExactState, Rational)>> {
    let marginal = state.marginal(&[q]);
    let total: BigInt = marginal.values().sum();
    let mut out = Vec::with_capacity(2);
    for (bits, mass) in marginal {
        let b = bits == 1;
        let mut s = state.clone();
        s.project(&[q], &[b])?;
        out.push((b, s, Rational::new(mass, total.clone())?));
    }
    Ok(out)
}

/// Projects `q` onto `|1>`. Errors if the projection is zero.
pub fn postselect(state: &ExactState, q: Qubit) -> Result<ExactState> {
    let mut s = state.clone();
    s.project(&[q], &[true])?;
    if s.mantissas().iter().all(|m| m == &BigInt::default()) {
        return Err(Error::InvalidPostselection { op: 0 });
    }
    Ok(s)
}

/// Correlated measurement. An outcome `a` is valid when some basis state in
/// the support has every partition equal to `a`; valid outcomes are drawn
/// with probability proportional to the leader partition's marginal, and all
/// partitions are then projected onto `a`.
pub fn corr_measure(
    state: &ExactState,
    parts: &[Vec<Qubit>],
) -> Result<Vec<(Vec<bool>, ExactState, Rational)>> {
    let j = parts[0].len();
    let leader = state.marginal(&parts[0]);
    let mut valid = std::collections::BTreeSet::new();
    for (idx, m) in state.mantissas().iter().enumerate() {
        if m == &BigInt::default() {
            continue;
        }
        let a = state.bits_of(&parts[0], idx);
        if parts[1..].iter().all(|p| state.bits_of(p, idx) == a) {
            valid.insert(a);
        }
    }
    if valid.is_empty() {
        return Err(Error::InvalidCorrelatedMeasurement { op: 0 });
    }
    let total: BigInt = valid.iter().map(|a| &leader[a]).sum();
    let all: Vec<Qubit> = parts.concat();
    let floor = Rational::pow2_inv(state.hadamards());
    let mut out = Vec::with_capacity(valid.len());
    for a in valid {
        let bits = unpack(a, j);
        let forced: Vec<bool> = bits.iter().copied().cycle().take(all.len()).collect();
        let mut s = state.clone();
        s.project(&all, &forced)?;
        if s.mass() < floor {
            return Err(Error::Invariant(format!(
                "correlated outcome mass {} below 2^-{}",
                s.mass(),
                state.hadamards()
            )));
        }
        let p = Rational::new(leader[&a].clone(), total.clone())?;
        out.push((bits, s, p));
    }
    Ok(out)
}

/// A non-collapsing sample of `qs`: outcomes with their Born probabilities.
/// The state is not disturbed.
pub fn noncollapse(state: &ExactState, qs: &[Qubit]) -> Result<Vec<(Vec<bool>, Rational)>> {
    let marginal = state.marginal(qs);
    let total: BigInt = marginal.values().sum();
    marginal
        .into_iter()
        .map(|(a, mass)| Ok((unpack(a, qs.len()), Rational::new(mass, total.clone())?)))
        .collect()
}

/// Exact distribution over reported transcripts, plus the output-1
/// probability.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeDistribution {
    pub entries: BTreeMap<String, Rational>,
    pub output_one: Rational,
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

impl OutcomeDistribution {
    pub fn from_branches(branches: &[Branch], positions: &[usize], output: Qubit) -> Self {
        Self::from_weighted(
            branches.iter().map(|b| {
                (
                    b.transcript.as_slice(),
                    b.state.classical_value(output) == Some(true),
                    &b.weight,
                )
            }),
            positions,
        )
    }

    /// Accumulates `(raw transcript, output bit, weight)` triples.
    pub fn from_weighted<'a>(
        items: impl IntoIterator<Item = (&'a [bool], bool, &'a Rational)>,
        positions: &[usize],
    ) -> Self {
        let mut entries: BTreeMap<String, Rational> = BTreeMap::new();
        let mut output_one = Rational::zero();
        for (transcript, out, weight) in items {
            let key: String = positions
                .iter()
                .map(|&p| if transcript[p] { '1' } else { '0' })
                .collect();
            *entries.entry(key).or_insert_with(Rational::zero) += weight;
            if out {
                output_one += weight;
            }
        }
        OutcomeDistribution {
            entries,
            output_one,
        }
    }

    pub fn prob(&self, transcript: &str) -> Rational {
        self.entries.get(transcript).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.entries.values().sum()
    }

    /// First transcript (in lexicographic order) whose probability differs.
    pub fn first_difference(&self, other: &Self) -> Option<(String, Rational, Rational)> {
        let keys: std::collections::BTreeSet<&String> =
            self.entries.keys().chain(other.entries.keys()).collect();
        keys.into_iter().find_map(|k| {
            let (a, b) = (self.prob(k), other.prob(k));
            (a != b).then(|| (k.clone(), a, b))
        })
    }

    /// The distribution of the output bit alone.
    pub fn output_only(&self) -> OutcomeDistribution {
        let mut entries = BTreeMap::new();
        let zero = self.output_one.complement();
        if !zero.is_zero() {
            entries.insert("0".to_string(), zero);
        }
        if !self.output_one.is_zero() {
            entries.insert("1".to_string(), self.output_one.clone());
        }
        OutcomeDistribution {
            entries,
            output_one: self.output_one.clone(),
        }
    }
}

impl fmt::Display for OutcomeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in &self.entries {
            let k = if k.is_empty() { "-" } else { k.as_str() };
            writeln!(f, "{k}\t{p}")?;
        }
        writeln!(f, "OUTPUT1\t{}", self.output_one)
    }
}

/// Observed counts from a sampled run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleCounts {
    pub counts: BTreeMap<String, u64>,
    pub output_ones: u64,
    pub shots: u64,
}

impl fmt::Display for SampleCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in &self.counts {
            let k = if k.is_empty() { "-" } else { k.as_str() };
            writeln!(f, "{k}\t{c}")?;
        }
        writeln!(f, "OUTPUT1\t{}/{}", self.output_ones, self.shots)
    }
}

pub struct Simulator<'c> {
    root: &'c Circuit,
    config: SimConfig,
    oracle: Vec<bool>,
    sub_cache: Mutex<HashMap<(String, Vec<bool>), Rational>>,
}

impl<'c> Simulator<'c> {
    pub fn new(circuit: &'c Circuit) -> Result<Self> {
        ensure_valid(circuit)?;
        Ok(Simulator {
            root: circuit,
            config: SimConfig::default(),
            oracle: Vec::new(),
            sub_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_config(mut self, config: SimConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_oracle(mut self, oracle: Vec<bool>) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn circuit(&self) -> &Circuit {
        self.root
    }

    fn initial(&self, body: &Circuit, input: &[bool]) -> Result<Branch> {
        if input.len() != body.inputs.len() {
            return Err(Error::InputLength {
                expected: body.inputs.len(),
                got: input.len(),
            });
        }
        let mut state = ExactState::new(body.width);
        for (&q, &b) in body.inputs.iter().zip(input) {
            if b {
                state.apply_x(q)?;
            }
        }
        Ok(Branch {
            state,
            weight: Rational::one(),
            transcript: Vec::with_capacity(body.raw_transcript_len()),
        })
    }

    /// Output-1 probability of subroutine `name` on `input`.
    pub fn subroutine_prob(&self, body: &Circuit, name: &str, input: Vec<bool>) -> Result<Rational> {
        let key = (name.to_string(), input);
        if let Some(p) = self.sub_cache.lock().expect("cache lock").get(&key) {
            return Ok(p.clone());
        }
        let sub = body
            .subroutine(self.root, name)
            .ok_or_else(|| Error::Domain(format!("unknown subroutine {name}")))?;
        let branches = self.run_body(sub, &key.1)?;
        let p = OutcomeDistribution::from_branches(&branches, &[], sub.output).output_one;
        self.sub_cache
            .lock()
            .expect("cache lock")
            .insert(key, p.clone());
        Ok(p)
    }

    /// Children of `branch` after `op`, zero-weight children dropped.
    fn step(&self, body: &Circuit, index: usize, op: &CircuitOp, branch: Branch) -> Result<Vec<Branch>> {
        let tag = |e: Error| e.at_op(index);
        let Branch {
            mut state,
            weight,
            transcript,
        } = branch;
        if apply_gate(&mut state, op, &self.oracle).map_err(tag)? {
            if state.live_qubits().len() > self.config.max_live_qubits {
                return Err(Error::Limit(format!(
                    "more than {} superposed qubits",
                    self.config.max_live_qubits
                )));
            }
            return Ok(vec![Branch {
                state,
                weight,
                transcript,
            }]);
        }
        let children = match op {
            CircuitOp::Measure(qs) => {
                let mut level = vec![(state, Rational::one(), Vec::new())];
                for &q in qs {
                    let mut next = Vec::new();
                    for (s, w, bits) in level {
                        for (b, s2, p) in measure(&s, q).map_err(tag)? {
                            let mut bits2: Vec<bool> = bits.clone();
                            bits2.push(b);
                            next.push((s2, &w * &p, bits2));
                        }
                    }
                    level = next;
                }
                level
            }
            CircuitOp::Postselect(q) => {
                let s = postselect(&state, *q).map_err(tag)?;
                vec![(s, Rational::one(), vec![true])]
            }
            CircuitOp::CorrMeasure(parts) => corr_measure(&state, parts)
                .map_err(tag)?
                .into_iter()
                .map(|(a, s, p)| {
                    let rec = a.iter().copied().cycle().take(a.len() * parts.len()).collect();
                    (s, p, rec)
                })
                .collect(),
            CircuitOp::NonCollapse(qs) => noncollapse(&state, qs)
                .map_err(tag)?
                .into_iter()
                .map(|(a, p)| (state.clone(), p, a))
                .collect(),
            CircuitOp::SubCall {
                name,
                inputs,
                output,
            } => {
                let bits = inputs
                    .iter()
                    .map(|&q| {
                        state
                            .classical_value(q)
                            .ok_or(Error::Domain(format!("subroutine input {q} is not classical")))
                    })
                    .collect::<Result<Vec<bool>>>()?;
                let p = self.subroutine_prob(body, name, bits)?;
                let mut out = Vec::with_capacity(2);
                if !p.is_one() {
                    out.push((state.clone(), p.complement(), vec![false]));
                }
                if !p.is_zero() {
                    let mut s = state;
                    s.apply_x(*output).map_err(tag)?;
                    out.push((s, p, vec![true]));
                }
                out
            }
            _ => unreachable!("unitary ops handled above"),
        };
        children
            .into_iter()
            .filter(|(_, p, _)| !p.is_zero())
            .map(|(s, p, bits)| {
                if !s.mass().is_dyadic() {
                    return Err(Error::Invariant(format!("non-dyadic branch mass at op {index}")));
                }
                let mut t = transcript.clone();
                t.extend(bits);
                Ok(Branch {
                    state: s,
                    weight: &weight * &p,
                    transcript: t,
                })
            })
            .collect()
    }

    fn expand(&self, body: &Circuit, index: usize, op: &CircuitOp, branches: Vec<Branch>) -> Result<Vec<Branch>> {
        #[cfg(feature = "parallel")]
        if self.config.jobs > 1 && branches.len() > 1 {
            use rayon::prelude::*;
            let nested: Result<Vec<Vec<Branch>>> = branches
                .into_par_iter()
                .map(|b| self.step(body, index, op, b))
                .collect();
            return Ok(nested?.into_iter().flatten().collect());
        }
        let mut out = Vec::with_capacity(branches.len());
        for b in branches {
            out.extend(self.step(body, index, op, b)?);
        }
        Ok(out)
    }

    fn run_body(&self, body: &Circuit, input: &[bool]) -> Result<Vec<Branch>> {
        let mut branches = vec![self.initial(body, input)?];
        for (i, op) in body.ops.iter().enumerate() {
            branches = self.expand(body, i, op, branches)?;
            if branches.len() > self.config.max_branches {
                return Err(Error::Limit(format!(
                    "more than {} branches after op {i}",
                    self.config.max_branches
                )));
            }
        }
        if body.measures_output_at_end() {
            let fin = CircuitOp::Measure(vec![body.output]);
            branches = self.expand(body, body.ops.len(), &fin, branches)?;
        }
        let total: Rational = branches.iter().map(|b| &b.weight).sum();
        if !total.is_one() {
            return Err(Error::Invariant(format!("branch weights sum to {total}")));
        }
        Ok(branches)
    }

    /// Every terminal branch of the run on `input`.
    pub fn run_branches(&self, input: &[bool]) -> Result<Vec<Branch>> {
        #[cfg(feature = "parallel")]
        if self.config.jobs > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.config.jobs)
                .build()
                .map_err(|e| Error::Domain(e.to_string()))?;
            return pool.install(|| self.run_body(self.root, input));
        }
        self.run_body(self.root, input)
    }

    pub fn run_exhaustive(&self, input: &[bool]) -> Result<OutcomeDistribution> {
        let branches = self.run_branches(input)?;
        Ok(OutcomeDistribution::from_branches(
            &branches,
            &self.root.reported_positions(),
            self.root.output,
        ))
    }

    /// Output-1 probability only.
    pub fn accept_prob(&self, input: &[bool]) -> Result<Rational> {
        Ok(self.run_exhaustive(input)?.output_one)
    }

    /// One sampled transcript per shot, drawn exactly with a ChaCha8 stream
    /// seeded by `seed`.
    pub fn run_sampled(&self, input: &[bool], seed: u64, shots: u64) -> Result<SampleCounts> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = self.root.reported_positions();
        let mut out = SampleCounts {
            shots,
            ..SampleCounts::default()
        };
        let fin = CircuitOp::Measure(vec![self.root.output]);
        for _ in 0..shots {
            let mut branch = self.initial(self.root, input)?;
            let tail = self.root.measures_output_at_end().then_some(&fin);
            for (i, op) in self.root.ops.iter().chain(tail).enumerate() {
                let parent = branch.weight.clone();
                let mut children = self.step(self.root, i, op, branch)?;
                let probs: Vec<Rational> = children
                    .iter()
                    .map(|c| c.weight.checked_div(&parent))
                    .collect::<Result<_>>()?;
                let k = rng::choose(&mut rng, &probs);
                branch = children.swap_remove(k);
            }
            let key: String = positions
                .iter()
                .map(|&p| if branch.transcript[p] { '1' } else { '0' })
                .collect();
            *out.counts.entry(key).or_default() += 1;
            if branch.state.classical_value(self.root.output) == Some(true) {
                out.output_ones += 1;
            }
        }
        Ok(out)
    }
}

pub fn run_exhaustive(circuit: &Circuit, input: &[bool]) -> Result<OutcomeDistribution> {
    Simulator::new(circuit)?.run_exhaustive(input)
}

pub fn run_sampled(circuit: &Circuit, input: &[bool], seed: u64, shots: u64) -> Result<SampleCounts> {
    Simulator::new(circuit)?.run_sampled(input, seed, shots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;

    fn dist(src: &str) -> OutcomeDistribution {
        run_exhaustive(&parse_circuit(src).unwrap(), &[]).unwrap()
    }

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn bell_pair_correlated() {
        let d = dist("qubits 3\nx 2\nh 0\nccx 2 0 1\ncorr [0] [1]\noutput 0\n");
        assert_eq!(d.prob("00"), r("1/2"));
        assert_eq!(d.prob("11"), r("1/2"));
        assert_eq!(d.entries.len(), 2);
    }

    #[test]
    fn three_term_state() {
        // (|01> + |10> + |11>)/sqrt3: q2 = q0 OR q1, postselected.
        let src = "qubits 4\nh 0\nh 1\nx 3\nccx 3 0 2\nccx 3 1 2\nccx 0 1 2\npostselect 2\ncorr [0] [1]\noutput 0\n";
        let d = dist(src);
        // Valid a is only 1 (the |11> term); leader marginal decides.
        assert_eq!(d.prob("111"), Rational::one());
    }

    #[test]
    fn anticorrelated_has_no_valid_output() {
        let src = "qubits 3\nx 2\nh 0\nccx 2 0 1\nx 1\ncorr [0] [1]\noutput 0\n";
        let err = run_exhaustive(&parse_circuit(src).unwrap(), &[]).unwrap_err();
        assert!(matches!(err, Error::InvalidCorrelatedMeasurement { op: 4 }));
    }

    #[test]
    fn noncollapse_does_not_disturb() {
        let d = dist("qubits 1\nh 0\nnoncollapse 0\nnoncollapse 0\noutput 0\n");
        for k in ["000", "001", "010", "011", "100", "101", "110", "111"] {
            assert_eq!(d.prob(k), r("1/8"), "{k}");
        }
        let d = dist("qubits 1\nh 0\nnoncollapse 0\nnoncollapse 0\nmeasure 0\noutput 0\n");
        assert_eq!(d.entries.len(), 8);
    }

    #[test]
    fn postselect_zero_is_invalid() {
        let err = run_exhaustive(&parse_circuit("qubits 1\npostselect 0\n").unwrap(), &[]).unwrap_err();
        assert!(matches!(err, Error::InvalidPostselection { op: 0 }));
    }

    #[test]
    fn postselect_conditions() {
        // Two coins, postselect on the OR: P[output=1] = 2/3.
        let src = "qubits 4\nh 0\nh 1\nx 3\nccx 3 0 2\nccx 3 1 2\nccx 0 1 2\npostselect 2\noutput 0\n";
        let d = dist(src);
        assert_eq!(d.output_one, r("2/3"));
    }

    #[test]
    fn native_subcall() {
        let src = "qubits 2\nsub coin\nqubits 1\ninput 0\nh 0\noutput 0\nendsub\nx 0\nmeasure 0\ncall coin in 0 out 1\noutput 1\n";
        let d = dist(src);
        assert_eq!(d.output_one, r("1/2"));
        assert_eq!(d.prob("111"), r("1/2"));
        assert_eq!(d.prob("100"), r("1/2"));
    }

    #[test]
    fn input_prefix() {
        let c = parse_circuit("qubits 3\ninput 0,1\nccx 0 1 2\noutput 2\n").unwrap();
        let sim = Simulator::new(&c).unwrap();
        assert_eq!(sim.accept_prob(&[true, true]).unwrap(), Rational::one());
        assert!(sim.accept_prob(&[true]).unwrap_err().is_usage());
    }

    #[test]
    fn sampled_is_reproducible() {
        let c = parse_circuit("qubits 2\nh 0\nh 1\nmeasure 0 1\noutput 0\n").unwrap();
        let a = run_sampled(&c, &[], 42, 50).unwrap();
        let b = run_sampled(&c, &[], 42, 50).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.values().sum::<u64>(), 50);
    }

    #[test]
    fn parallel_matches_serial() {
        let c = parse_circuit("qubits 3\nh 0\nh 1\nh 2\nmeasure 0 1 2\noutput 0\n").unwrap();
        let serial = Simulator::new(&c).unwrap().run_exhaustive(&[]).unwrap();
        let cfg = SimConfig {
            jobs: 4,
            ..SimConfig::default()
        };
        let par = Simulator::new(&c).unwrap().with_config(cfg).run_exhaustive(&[]).unwrap();
        assert_eq!(serial, par);
    }

    #[test]
    fn branch_limit() {
        let c = parse_circuit("qubits 3\nh 0\nh 1\nh 2\nmeasure 0 1 2\noutput 0\n").unwrap();
        let cfg = SimConfig {
            max_branches: 4,
            ..SimConfig::default()
        };
        let err = Simulator::new(&c).unwrap().with_config(cfg).run_exhaustive(&[]).unwrap_err();
        assert!(matches!(err, Error::Limit(_)));
    }
}
