//! Classical bit-by-bit sampling of circuits with correlated measurements,
//! using exact state computations as a counting oracle.
//!
//! The sampler walks the ops once. At every op that yields classical
//! information it asks the oracle for conditional probabilities, given the
//! outcomes chosen so far, and fixes one bit at a time. Two policies are
//! available for correlated measurements:
//!
//! * `Literal`: per output bit, query `P_i = Pr[partition i has bit j = 1]`
//!   given the earlier bits of every partition. A bit is forced when some
//!   `P_i` is 0 or 1 (contradictory forces are an integrity error); otherwise
//!   a coin with the leader's bias is flipped.
//! * `Filtered`: the bias of bit `j` is `W(prefix 1) / W(prefix)` where `W`
//!   sums the leader marginal over valid outputs extending the prefix.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, CircuitOp, Qubit};
use crate::error::{Error, Result};
use crate::numeric::Rational;
use crate::rng;
use crate::simulator::{apply_gate, OutcomeDistribution, SampleCounts, Simulator};
use crate::state::ExactState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerMode {
    Literal,
    Filtered,
}

impl std::str::FromStr for SamplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(SamplerMode::Literal),
            "filtered" => Ok(SamplerMode::Filtered),
            _ => Err(Error::Parse(format!("unknown sampler mode {s:?}"))),
        }
    }
}

/// Exact probabilities for circuit prefixes under postulated outcomes.
///
/// `state_at(pc, outcomes)` is the unnormalized state after `ops[..pc]`
/// with every recorded op forced to the corresponding bits of `outcomes`.
/// States are cached per key; the cache takes many readers and one writer.
pub struct ProbOracle<'c> {
    circuit: &'c Circuit,
    input: Vec<bool>,
    oracle: Vec<bool>,
    cache: RwLock<HashMap<(usize, Vec<bool>), Arc<ExactState>>>,
}

impl<'c> ProbOracle<'c> {
    pub fn new(circuit: &'c Circuit, input: &[bool], oracle: &[bool]) -> Result<Self> {
        if input.len() != circuit.inputs.len() {
            return Err(Error::InputLength {
                expected: circuit.inputs.len(),
                got: input.len(),
            });
        }
        Ok(ProbOracle {
            circuit,
            input: input.to_vec(),
            oracle: oracle.to_vec(),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn cached_states(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    fn op(&self, pc: usize) -> CircuitOp {
        match self.circuit.ops.get(pc) {
            Some(op) => op.clone(),
            None => CircuitOp::Measure(vec![self.circuit.output]),
        }
    }

    pub fn state_at(&self, pc: usize, outcomes: &[bool]) -> Result<Arc<ExactState>> {
        let key = (pc, outcomes.to_vec());
        if let Some(s) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(s));
        }
        let state = if pc == 0 {
            let mut s = ExactState::new(self.circuit.width);
            for (&q, &b) in self.circuit.inputs.iter().zip(&self.input) {
                if b {
                    s.apply_x(q)?;
                }
            }
            s
        } else {
            let op = self.op(pc - 1);
            let bits = op.recorded_bits();
            if bits > outcomes.len() {
                return Err(Error::Invariant(format!("too few outcomes for op {}", pc - 1)));
            }
            let (before, mine) = outcomes.split_at(outcomes.len() - bits);
            let mut s = (*self.state_at(pc - 1, before)?).clone();
            force(&mut s, &op, mine, &self.oracle).map_err(|e| e.at_op(pc - 1))?;
            s
        };
        let state = Arc::new(state);
        self.cache
            .write()
            .expect("cache lock")
            .insert(key, Arc::clone(&state));
        Ok(state)
    }
}

/// Applies `op` with its recorded outcome fixed to `bits`.
fn force(s: &mut ExactState, op: &CircuitOp, bits: &[bool], oracle: &[bool]) -> Result<()> {
    if apply_gate(s, op, oracle)? {
        return Ok(());
    }
    match op {
        CircuitOp::Measure(qs) => s.project(qs, bits),
        CircuitOp::Postselect(q) => s.project(&[*q], &[true]),
        CircuitOp::CorrMeasure(parts) => s.project(&parts.concat(), bits),
        CircuitOp::NonCollapse(_) => Ok(()),
        CircuitOp::SubCall { output, .. } => {
            if bits[0] {
                s.apply_x(*output)?;
            }
            Ok(())
        }
        _ => unreachable!("unitary ops handled above"),
    }
}

fn mass_where(state: &ExactState, pred: impl Fn(usize) -> bool) -> BigInt {
    state
        .mantissas()
        .iter()
        .enumerate()
        .filter(|(idx, m)| !m.is_zero() && pred(*idx))
        .map(|(_, m)| m * m)
        .sum()
}

fn prefix_matches(state: &ExactState, part: &[Qubit], prefix: &[bool], idx: usize) -> bool {
    part.iter().zip(prefix).all(|(&q, &b)| state.bit(q, idx) == b)
}

/// `Pr[partition i has bit j = 1]` given that every partition's first `j`
/// bits equal `prefix` (so `prefix.len() == j`).
pub fn oracle_bit_prob(
    state: &ExactState,
    parts: &[Vec<Qubit>],
    i: usize,
    j: usize,
    prefix: &[bool],
) -> Result<Rational> {
    assert_eq!(prefix.len(), j, "conditioning covers bits before j");
    let cond = |idx: usize| parts.iter().all(|p| prefix_matches(state, p, prefix, idx));
    let total = mass_where(state, cond);
    if total.is_zero() {
        return Err(Error::ZeroConditioning { op: 0 });
    }
    let q = parts[i][j];
    let hit = mass_where(state, |idx| cond(idx) && state.bit(q, idx));
    let half = BigInt::from(1) << state.half_exponent() as usize;
    for m in [&total, &hit] {
        let unconditioned = Rational::new(m.clone(), half.clone())?;
        if !unconditioned.is_dyadic() {
            return Err(Error::Invariant("non-dyadic oracle answer".into()));
        }
    }
    Rational::new(hit, total)
}

/// `W(prefix)`: leader marginal mass summed over valid outputs that extend
/// `prefix`, as an unnormalized mantissa-squared sum.
pub fn valid_weight(state: &ExactState, parts: &[Vec<Qubit>], prefix: &[bool]) -> BigInt {
    let leader = &parts[0];
    let mut valid = std::collections::BTreeSet::new();
    let mut leader_mass: HashMap<u64, BigInt> = HashMap::new();
    for (idx, m) in state.mantissas().iter().enumerate() {
        if m.is_zero() || !prefix_matches(state, leader, prefix, idx) {
            continue;
        }
        let a = state.bits_of(leader, idx);
        *leader_mass.entry(a).or_default() += m * m;
        if parts[1..].iter().all(|p| state.bits_of(p, idx) == a) {
            valid.insert(a);
        }
    }
    valid.iter().map(|a| &leader_mass[a]).sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SamplerEvent {
    Coin { op: usize, bias: Rational, draw: bool },
    Forced { op: usize, bit: bool },
    /// The string chosen by one correlated measurement.
    Corr { op: usize, value: Vec<bool> },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SamplerTranscript {
    pub events: Vec<SamplerEvent>,
    /// Raw transcript bits in the simulator's layout.
    pub bits: Vec<bool>,
}

/// Source of coin flips for biases strictly between 0 and 1.
trait Coins {
    fn flip(&mut self, bias: &Rational) -> bool;
}

struct RngCoins<'r>(&'r mut ChaCha8Rng);

impl Coins for RngCoins<'_> {
    fn flip(&mut self, bias: &Rational) -> bool {
        rng::bernoulli(self.0, bias)
    }
}

/// Follows a fixed choice path, then takes 0 for every new coin while
/// recording the biases met.
struct PathCoins {
    path: Vec<bool>,
    pos: usize,
    biases: Vec<Rational>,
}

impl Coins for PathCoins {
    fn flip(&mut self, bias: &Rational) -> bool {
        let b = if self.pos < self.path.len() {
            self.path[self.pos]
        } else {
            self.path.push(false);
            false
        };
        self.pos += 1;
        self.biases.push(bias.clone());
        b
    }
}

pub struct ClassicalSampler<'c> {
    circuit: &'c Circuit,
    mode: SamplerMode,
    probs: ProbOracle<'c>,
    sim: Simulator<'c>,
}

impl<'c> ClassicalSampler<'c> {
    pub fn new(circuit: &'c Circuit, mode: SamplerMode) -> Result<Self> {
        Self::with_input(circuit, mode, &[], &[])
    }

    pub fn with_input(
        circuit: &'c Circuit,
        mode: SamplerMode,
        input: &[bool],
        oracle: &[bool],
    ) -> Result<Self> {
        let sim = Simulator::new(circuit)?.with_oracle(oracle.to_vec());
        Ok(ClassicalSampler {
            circuit,
            mode,
            probs: ProbOracle::new(circuit, input, oracle)?,
            sim,
        })
    }

    pub fn oracle(&self) -> &ProbOracle<'c> {
        &self.probs
    }

    fn coin(
        coins: &mut dyn Coins,
        t: &mut SamplerTranscript,
        op: usize,
        bias: Rational,
    ) -> bool {
        if bias.is_zero() || bias.is_one() {
            let bit = bias.is_one();
            t.events.push(SamplerEvent::Forced { op, bit });
            return bit;
        }
        let draw = coins.flip(&bias);
        t.events.push(SamplerEvent::Coin { op, bias, draw });
        draw
    }

    /// Chooses a common string for `parts`, bit by bit.
    fn choose_string(
        &self,
        mode: SamplerMode,
        coins: &mut dyn Coins,
        t: &mut SamplerTranscript,
        op: usize,
        state: &ExactState,
        parts: &[Vec<Qubit>],
    ) -> Result<Vec<bool>> {
        let j_len = parts[0].len();
        let mut prefix = Vec::with_capacity(j_len);
        match mode {
            SamplerMode::Filtered => {
                let root = valid_weight(state, parts, &[]);
                if root.is_zero() {
                    return Err(Error::InvalidCorrelatedMeasurement { op });
                }
                let mut w = root;
                for _ in 0..j_len {
                    prefix.push(true);
                    let w1 = valid_weight(state, parts, &prefix);
                    prefix.pop();
                    let bias = Rational::new(w1.clone(), w.clone())?;
                    let bit = Self::coin(coins, t, op, bias);
                    w = if bit { w1 } else { w - w1 };
                    prefix.push(bit);
                }
            }
            SamplerMode::Literal => {
                for j in 0..j_len {
                    let ps = (0..parts.len())
                        .map(|i| oracle_bit_prob(state, parts, i, j, &prefix).map_err(|e| e.at_op(op)))
                        .collect::<Result<Vec<_>>>()?;
                    let forced_one = ps.iter().position(Rational::is_one);
                    let forced_zero = ps.iter().position(Rational::is_zero);
                    let bit = match (forced_zero, forced_one) {
                        (Some(_), Some(_)) => return Err(Error::Integrity { op, bit: j }),
                        (Some(_), None) | (None, Some(_)) => {
                            let bit = forced_one.is_some();
                            t.events.push(SamplerEvent::Forced { op, bit });
                            bit
                        }
                        (None, None) => Self::coin(coins, t, op, ps[0].clone()),
                    };
                    prefix.push(bit);
                }
            }
        }
        Ok(prefix)
    }

    fn walk(&self, coins: &mut dyn Coins) -> Result<(bool, SamplerTranscript)> {
        let c = self.circuit;
        let mut t = SamplerTranscript::default();
        let steps = c.ops.len() + usize::from(c.measures_output_at_end());
        for pc in 0..steps {
            let op = self.probs.op(pc);
            if matches!(
                op,
                CircuitOp::Hadamard(_)
                    | CircuitOp::X(_)
                    | CircuitOp::Toffoli(..)
                    | CircuitOp::OracleQuery { .. }
            ) {
                continue;
            }
            let state = self.probs.state_at(pc, &t.bits)?;
            match &op {
                CircuitOp::Measure(qs) | CircuitOp::NonCollapse(qs) => {
                    // A plain measurement samples like a single partition.
                    let parts = [qs.clone()];
                    let bits = self.choose_string(SamplerMode::Filtered, coins, &mut t, pc, &state, &parts)?;
                    t.bits.extend(bits);
                }
                CircuitOp::Postselect(q) => {
                    if mass_where(&state, |idx| state.bit(*q, idx)).is_zero() {
                        return Err(Error::InvalidPostselection { op: pc });
                    }
                    t.bits.push(true);
                }
                CircuitOp::CorrMeasure(parts) => {
                    let a = self.choose_string(self.mode, coins, &mut t, pc, &state, parts)?;
                    t.events.push(SamplerEvent::Corr {
                        op: pc,
                        value: a.clone(),
                    });
                    for _ in parts {
                        t.bits.extend(&a);
                    }
                }
                CircuitOp::SubCall { name, inputs, .. } => {
                    let bits = inputs
                        .iter()
                        .map(|&q| {
                            state
                                .classical_value(q)
                                .ok_or(Error::Domain(format!("subroutine input {q} is not classical")))
                        })
                        .collect::<Result<Vec<bool>>>()?;
                    let p = self.sim.subroutine_prob(c, name, bits)?;
                    let b = Self::coin(coins, &mut t, pc, p);
                    t.bits.push(b);
                }
                _ => unreachable!(),
            }
        }
        let fin = self.probs.state_at(steps, &t.bits)?;
        let out = fin.classical_value(c.output).unwrap_or(false);
        Ok((out, t))
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<(bool, SamplerTranscript)> {
        self.walk(&mut RngCoins(rng))
    }

    pub fn sample_shots(&self, seed: u64, shots: u64) -> Result<SampleCounts> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = self.circuit.reported_positions();
        let mut out = SampleCounts {
            shots,
            ..SampleCounts::default()
        };
        for _ in 0..shots {
            let (o, t) = self.sample(&mut rng)?;
            let key: String = positions
                .iter()
                .map(|&p| if t.bits[p] { '1' } else { '0' })
                .collect();
            *out.counts.entry(key).or_default() += 1;
            out.output_ones += u64::from(o);
        }
        Ok(out)
    }

    /// Exact distribution of the sampler: every coin path is walked once and
    /// weighted by its exact probability.
    pub fn enumerate(&self) -> Result<OutcomeDistribution> {
        let mut leaves: Vec<(Vec<bool>, bool, Rational)> = Vec::new();
        let mut stack = vec![Vec::new()];
        while let Some(path) = stack.pop() {
            let fixed = path.len();
            let mut coins = PathCoins {
                path,
                pos: 0,
                biases: Vec::new(),
            };
            let (out, t) = self.walk(&mut coins)?;
            let mut weight = Rational::one();
            for (b, p) in coins.path.iter().zip(&coins.biases) {
                weight *= if *b { p.clone() } else { p.complement() };
            }
            for k in fixed..coins.path.len() {
                let mut sibling = coins.path[..k].to_vec();
                sibling.push(true);
                stack.push(sibling);
            }
            leaves.push((t.bits, out, weight));
        }
        Ok(OutcomeDistribution::from_weighted(
            leaves.iter().map(|(t, o, w)| (t.as_slice(), *o, w)),
            &self.circuit.reported_positions(),
        ))
    }
}

pub fn sample_literal(circuit: &Circuit, seed: u64) -> Result<(bool, SamplerTranscript)> {
    let s = ClassicalSampler::new(circuit, SamplerMode::Literal)?;
    s.sample(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_filtered(circuit: &Circuit, seed: u64) -> Result<(bool, SamplerTranscript)> {
    let s = ClassicalSampler::new(circuit, SamplerMode::Filtered)?;
    s.sample(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn distribution_of_sampler(circuit: &Circuit, mode: SamplerMode) -> Result<OutcomeDistribution> {
    ClassicalSampler::new(circuit, mode)?.enumerate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;
    use crate::gen::{random_circuit, GenConfig};
    use crate::simulator::run_exhaustive;

    const BELL: &str = "qubits 3\nx 2\nh 0\nccx 2 0 1\ncorr [0] [1]\noutput 0\n";
    const THREE_TERM: &str =
        "qubits 4\nh 0\nh 1\nx 3\nccx 3 0 2\nccx 3 1 2\nccx 0 1 2\npostselect 2\ncorr [0] [1]\noutput 0\n";

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn state_before_corr(c: &Circuit, outcomes: &[bool]) -> Arc<ExactState> {
        let pc = c.ops.iter().position(|op| matches!(op, CircuitOp::CorrMeasure(_))).unwrap();
        ProbOracle::new(c, &[], &[]).unwrap().state_at(pc, outcomes).unwrap()
    }

    #[test]
    fn bit_probs() {
        let parts = vec![vec![0], vec![1]];
        let bell = parse_circuit(BELL).unwrap();
        let s = state_before_corr(&bell, &[]);
        assert_eq!(oracle_bit_prob(&s, &parts, 0, 0, &[]).unwrap(), r("1/2"));
        assert_eq!(oracle_bit_prob(&s, &parts, 1, 0, &[]).unwrap(), r("1/2"));

        let gadget = parse_circuit("qubits 2\nx 0\nh 1\ncorr [0] [1]\noutput 1\n").unwrap();
        let s = state_before_corr(&gadget, &[]);
        assert_eq!(oracle_bit_prob(&s, &parts, 0, 0, &[]).unwrap(), Rational::one());

        let three = parse_circuit(THREE_TERM).unwrap();
        let s = state_before_corr(&three, &[true]);
        assert_eq!(oracle_bit_prob(&s, &parts, 0, 0, &[]).unwrap(), r("2/3"));
        assert_eq!(oracle_bit_prob(&s, &parts, 1, 0, &[]).unwrap(), r("2/3"));
        assert_eq!(valid_weight(&s, &parts, &[true]), valid_weight(&s, &parts, &[]));
        assert!(valid_weight(&s, &parts, &[false]).is_zero());
    }

    #[test]
    fn bell_both_modes() {
        let c = parse_circuit(BELL).unwrap();
        let direct = run_exhaustive(&c, &[]).unwrap();
        for mode in [SamplerMode::Literal, SamplerMode::Filtered] {
            assert_eq!(distribution_of_sampler(&c, mode).unwrap(), direct);
        }
    }

    #[test]
    fn leader_gadget_is_forced() {
        let c = parse_circuit("qubits 2\nx 0\nh 1\ncorr [0] [1]\noutput 1\n").unwrap();
        for seed in 0..20 {
            let (out, t) = sample_literal(&c, seed).unwrap();
            assert!(out);
            assert_eq!(t.bits, vec![true, true]);
        }
    }

    #[test]
    fn three_term_discrepancy() {
        let c = parse_circuit(THREE_TERM).unwrap();
        let direct = run_exhaustive(&c, &[]).unwrap();
        assert_eq!(direct.prob("111"), Rational::one());
        let filtered = distribution_of_sampler(&c, SamplerMode::Filtered).unwrap();
        assert_eq!(filtered, direct);
        let literal = distribution_of_sampler(&c, SamplerMode::Literal).unwrap();
        assert_eq!(literal.prob("100"), r("1/3"));
        assert_eq!(literal.prob("111"), r("2/3"));
        assert_ne!(literal, direct);
    }

    #[test]
    fn seeded_samples_repeat() {
        let c = parse_circuit(BELL).unwrap();
        for mode in [SamplerMode::Literal, SamplerMode::Filtered] {
            let s = ClassicalSampler::new(&c, mode).unwrap();
            assert_eq!(s.sample_shots(9, 40).unwrap(), s.sample_shots(9, 40).unwrap());
        }
        assert_eq!(sample_filtered(&c, 3).unwrap(), sample_filtered(&c, 3).unwrap());
    }

    #[test]
    fn filtered_matches_exhaustive_on_random_circuits() {
        let cfg = GenConfig::gates(4, 10)
            .with_measure()
            .with_postselect()
            .with_corr()
            .with_noncollapse(2);
        for seed in 0..200 {
            let c = random_circuit(&cfg, seed);
            let direct = run_exhaustive(&c, &[]);
            let sampled = distribution_of_sampler(&c, SamplerMode::Filtered);
            match (direct, sampled) {
                (Ok(a), Ok(b)) => assert_eq!(a, b, "seed {seed}"),
                (Err(_), Err(_)) => {}
                (a, b) => panic!("seed {seed}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn literal_matches_on_product_partitions() {
        // Each partition is prepared independently, so the partitions are in
        // a product state.
        let c = parse_circuit("qubits 5\nx 4\nh 0\nccx 4 0 1\nh 2\nh 3\ncorr [0,1] [2,3]\noutput 1\n");
        let c = c.unwrap();
        match (run_exhaustive(&c, &[]), distribution_of_sampler(&c, SamplerMode::Literal)) {
            (Ok(a), Ok(b)) => assert_eq!(a, b),
            (a, b) => panic!("{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn oracle_caches_states() {
        let c = parse_circuit(BELL).unwrap();
        let s = ClassicalSampler::new(&c, SamplerMode::Filtered).unwrap();
        s.enumerate().unwrap();
        let n = s.oracle().cached_states();
        s.enumerate().unwrap();
        assert_eq!(n, s.oracle().cached_states());
    }
}
