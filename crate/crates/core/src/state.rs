//! Exact unnormalized state vectors.
//!
//! Only qubits that have been put in superposition occupy a position in the
//! dense amplitude vector. Qubits still in a known basis state, and qubits
//! that have been measured, live in a side table, so width-heavy circuits
//! with mostly classical ancillas stay cheap.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::circuit::Qubit;
use crate::error::{Error, Result};
use crate::numeric::{Rational, SqrtDyadic};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Quantum, but known to be in this basis state.
    Basis(bool),
    /// Quantum, at this bit position of the amplitude index.
    Live(usize),
    /// Measured.
    Classical(bool),
}

/// `sum_i mantissa_i |i> / sqrt(2)^half_exponent` over the live qubits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactState {
    slots: Vec<Slot>,
    live: Vec<Qubit>,
    mantissas: Vec<BigInt>,
    half_exponent: u32,
    hadamards: u32,
}

impl ExactState {
    /// `|0...0>` on `width` qubits.
    pub fn new(width: usize) -> Self {
        ExactState {
            slots: vec![Slot::Basis(false); width],
            live: Vec::new(),
            mantissas: vec![BigInt::one()],
            half_exponent: 0,
            hadamards: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, q: Qubit) -> Slot {
        self.slots[q]
    }

    pub fn live_qubits(&self) -> &[Qubit] {
        &self.live
    }

    pub fn mantissas(&self) -> &[BigInt] {
        &self.mantissas
    }

    pub fn half_exponent(&self) -> u32 {
        self.half_exponent
    }

    /// Hadamards applied along this branch's history.
    pub fn hadamards(&self) -> u32 {
        self.hadamards
    }

    pub fn is_classical(&self, q: Qubit) -> bool {
        matches!(self.slots[q], Slot::Classical(_))
    }

    pub fn classical_value(&self, q: Qubit) -> Option<bool> {
        match self.slots[q] {
            Slot::Classical(b) => Some(b),
            _ => None,
        }
    }

    /// Value of qubit `q` in the basis state with amplitude index `idx`.
    #[inline]
    pub fn bit(&self, q: Qubit, idx: usize) -> bool {
        match self.slots[q] {
            Slot::Basis(b) | Slot::Classical(b) => b,
            Slot::Live(pos) => (idx >> pos) & 1 == 1,
        }
    }

    /// Bits of `qs` at index `idx`, first qubit most significant.
    #[inline]
    pub fn bits_of(&self, qs: &[Qubit], idx: usize) -> u64 {
        qs.iter()
            .fold(0u64, |acc, &q| (acc << 1) | u64::from(self.bit(q, idx)))
    }

    /// Sum of squared mantissas.
    pub fn mass_int(&self) -> BigInt {
        self.mantissas.iter().map(|m| m * m).sum()
    }

    /// Squared norm `sum m^2 / 2^h`: the unconditioned probability of the
    /// outcome history that produced this state.
    pub fn mass(&self) -> Rational {
        Rational::new(self.mass_int(), BigInt::one() << self.half_exponent as usize)
            .expect("power of two is nonzero")
    }

    /// Squared-mantissa sums grouped by `key(idx)` over nonzero amplitudes.
    pub fn masses_by<K: Ord>(&self, key: impl Fn(usize) -> K) -> BTreeMap<K, BigInt> {
        let mut out: BTreeMap<K, BigInt> = BTreeMap::new();
        for (idx, m) in self.mantissas.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            *out.entry(key(idx)).or_default() += m * m;
        }
        out
    }

    /// Amplitude of the full basis assignment `bits` (indexed by qubit).
    /// Zero if `bits` disagrees with a known or measured qubit.
    pub fn amplitude(&self, bits: &[bool]) -> SqrtDyadic {
        let mut idx = 0;
        for (q, slot) in self.slots.iter().enumerate() {
            match *slot {
                Slot::Basis(b) | Slot::Classical(b) if b != bits[q] => return SqrtDyadic::zero(),
                Slot::Live(pos) if bits[q] => idx |= 1 << pos,
                _ => {}
            }
        }
        SqrtDyadic::new(self.mantissas[idx].clone(), self.half_exponent)
    }

    fn require_quantum(&self, q: Qubit) -> Result<()> {
        if self.is_classical(q) {
            Err(Error::ClassicalRegister { op: 0, qubit: q })
        } else {
            Ok(())
        }
    }

    /// Moves a known-basis qubit into the amplitude vector.
    fn promote(&mut self, q: Qubit) {
        let Slot::Basis(b) = self.slots[q] else {
            return;
        };
        let pos = self.live.len();
        let n = self.mantissas.len();
        let zeros = std::iter::repeat_with(BigInt::zero).take(n);
        if b {
            let old = std::mem::take(&mut self.mantissas);
            self.mantissas = zeros.chain(old).collect();
        } else {
            self.mantissas.extend(zeros);
        }
        self.live.push(q);
        self.slots[q] = Slot::Live(pos);
    }

    fn canonicalize(&mut self) {
        while self.half_exponent >= 2 && self.mantissas.iter().all(|m| !m.bit(0)) {
            if self.mantissas.iter().all(Zero::is_zero) {
                break;
            }
            for m in &mut self.mantissas {
                *m >>= 1;
            }
            self.half_exponent -= 2;
        }
    }

    pub fn apply_h(&mut self, q: Qubit) -> Result<()> {
        self.require_quantum(q)?;
        self.promote(q);
        let Slot::Live(pos) = self.slots[q] else {
            unreachable!()
        };
        let stride = 1usize << pos;
        for idx in 0..self.mantissas.len() {
            if idx & stride != 0 {
                continue;
            }
            let a = std::mem::take(&mut self.mantissas[idx]);
            let b = std::mem::take(&mut self.mantissas[idx | stride]);
            self.mantissas[idx] = &a + &b;
            self.mantissas[idx | stride] = a - b;
        }
        self.half_exponent += 1;
        self.hadamards += 1;
        self.canonicalize();
        Ok(())
    }

    pub fn apply_x(&mut self, q: Qubit) -> Result<()> {
        self.require_quantum(q)?;
        match self.slots[q] {
            Slot::Basis(b) => self.slots[q] = Slot::Basis(!b),
            Slot::Live(pos) => {
                let stride = 1usize << pos;
                for idx in 0..self.mantissas.len() {
                    if idx & stride == 0 {
                        self.mantissas.swap(idx, idx | stride);
                    }
                }
            }
            Slot::Classical(_) => unreachable!(),
        }
        Ok(())
    }

    /// Flips `target` on every basis state where `flip(idx)` holds. Controls
    /// may be classical; the target must be quantum.
    fn controlled_flip(&mut self, target: Qubit, flip: impl Fn(&Self, usize) -> bool) -> Result<()> {
        self.require_quantum(target)?;
        if let Slot::Basis(b) = self.slots[target] {
            let mut fires = (0..self.mantissas.len())
                .filter(|&i| !self.mantissas[i].is_zero())
                .map(|i| flip(self, i));
            let first = fires.next();
            if first.is_none() || fires.all(|f| Some(f) == first) {
                if first == Some(true) {
                    self.slots[target] = Slot::Basis(!b);
                }
                return Ok(());
            }
            self.promote(target);
        }
        let Slot::Live(pos) = self.slots[target] else {
            unreachable!()
        };
        let stride = 1usize << pos;
        for idx in 0..self.mantissas.len() {
            // The flip condition never reads the target, so checking the
            // zero-target index decides the pair.
            if idx & stride == 0 && flip(self, idx) {
                self.mantissas.swap(idx, idx | stride);
            }
        }
        Ok(())
    }

    pub fn apply_toffoli(&mut self, c1: Qubit, c2: Qubit, target: Qubit) -> Result<()> {
        self.controlled_flip(target, |s, idx| s.bit(c1, idx) && s.bit(c2, idx))
    }

    /// `target ^= oracle[i]` where `i` is the value of `index` (first qubit
    /// most significant). Indices past the oracle end read as 0.
    pub fn apply_query(&mut self, index: &[Qubit], target: Qubit, oracle: &[bool]) -> Result<()> {
        self.controlled_flip(target, |s, idx| {
            let i = s.bits_of(index, idx) as usize;
            oracle.get(i).copied().unwrap_or(false)
        })
    }

    /// Projects the quantum qubits `qs` onto `bits` and marks them classical.
    /// The result is left unnormalized and may be the zero vector.
    pub fn project(&mut self, qs: &[Qubit], bits: &[bool]) -> Result<()> {
        for &q in qs {
            self.require_quantum(q)?;
        }
        let mut keep_mask = 0usize;
        let mut keep_value = 0usize;
        let mut zero = false;
        let mut removed = Vec::new();
        for (&q, &b) in qs.iter().zip(bits) {
            match self.slots[q] {
                Slot::Basis(v) => zero |= v != b,
                Slot::Live(pos) => {
                    keep_mask |= 1 << pos;
                    if b {
                        keep_value |= 1 << pos;
                    }
                    removed.push(pos);
                }
                Slot::Classical(_) => unreachable!(),
            }
            self.slots[q] = Slot::Classical(b);
        }
        if !removed.is_empty() {
            removed.sort_unstable();
            let old = std::mem::take(&mut self.mantissas);
            self.mantissas = old
                .into_iter()
                .enumerate()
                .filter(|(idx, _)| idx & keep_mask == keep_value)
                .map(|(_, m)| m)
                .collect();
            // Surviving live qubits shift down past each removed position.
            let survivors: Vec<Qubit> = self
                .live
                .iter()
                .copied()
                .filter(|&q| !matches!(self.slots[q], Slot::Classical(_)))
                .collect();
            for (new_pos, &q) in survivors.iter().enumerate() {
                self.slots[q] = Slot::Live(new_pos);
            }
            self.live = survivors;
        }
        if zero {
            for m in &mut self.mantissas {
                *m = BigInt::zero();
            }
        }
        self.canonicalize();
        Ok(())
    }

    /// Marginal squared-mantissa sums of `qs` (first qubit most significant).
    pub fn marginal(&self, qs: &[Qubit]) -> BTreeMap<u64, BigInt> {
        self.masses_by(|idx| self.bits_of(qs, idx))
    }

    /// Checks `sum m^2 = 2^h`, which holds for any state reached by gates
    /// alone.
    pub fn is_normalized(&self) -> bool {
        self.mass_int() == BigInt::one() << self.half_exponent as usize
    }
}

/// `bits` as a `Vec<bool>` of length `len`, most significant first.
pub fn unpack(bits: u64, len: usize) -> Vec<bool> {
    (0..len).rev().map(|i| (bits >> i) & 1 == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amps(s: &ExactState, width: usize) -> Vec<SqrtDyadic> {
        (0..1usize << width)
            .map(|i| {
                let bits: Vec<bool> = (0..width).map(|q| (i >> q) & 1 == 1).collect();
                s.amplitude(&bits)
            })
            .collect()
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = ExactState::new(1);
        s.apply_h(0).unwrap();
        assert_eq!(s.mantissas(), &[BigInt::one(), BigInt::one()]);
        assert_eq!(s.half_exponent(), 1);
        assert!(s.is_normalized());
    }

    #[test]
    fn hadamard_squared_is_identity() {
        let mut s = ExactState::new(1);
        s.apply_h(0).unwrap();
        s.apply_h(0).unwrap();
        assert_eq!(s.half_exponent(), 0);
        assert_eq!(amps(&s, 1), vec![SqrtDyadic::new(1, 0), SqrtDyadic::zero()]);
        assert_eq!(s.hadamards(), 2);
    }

    #[test]
    fn toffoli_on_ones() {
        let mut s = ExactState::new(3);
        s.apply_x(0).unwrap();
        s.apply_x(1).unwrap();
        s.apply_toffoli(0, 1, 2).unwrap();
        assert_eq!(s.slot(2), Slot::Basis(true));
        // Superposed control promotes the target.
        let mut s = ExactState::new(3);
        s.apply_h(0).unwrap();
        s.apply_x(1).unwrap();
        s.apply_toffoli(0, 1, 2).unwrap();
        assert_eq!(s.live_qubits(), &[0, 2]);
        assert_eq!(s.amplitude(&[true, true, true]), SqrtDyadic::new(1, 1));
        assert_eq!(s.amplitude(&[true, true, false]), SqrtDyadic::zero());
        assert_eq!(s.amplitude(&[false, true, false]), SqrtDyadic::new(1, 1));
    }

    #[test]
    fn projection_compacts() {
        let mut s = ExactState::new(2);
        s.apply_h(0).unwrap();
        s.apply_h(1).unwrap();
        s.project(&[0], &[true]).unwrap();
        assert_eq!(s.live_qubits(), &[1]);
        assert_eq!(s.slot(1), Slot::Live(0));
        assert_eq!(s.mass(), Rational::frac(1, 2));
        assert!(s.apply_h(0).is_err());
    }

    #[test]
    fn query_reads_oracle() {
        let oracle = [false, true, true, false];
        for i in 0..4usize {
            let mut s = ExactState::new(3);
            if i & 2 != 0 {
                s.apply_x(0).unwrap();
            }
            if i & 1 != 0 {
                s.apply_x(1).unwrap();
            }
            s.apply_query(&[0, 1], 2, &oracle).unwrap();
            assert_eq!(s.slot(2), Slot::Basis(oracle[i]));
        }
    }
}
