//! Exact categorical draws from rational probabilities.

use num_bigint::{BigInt, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::numeric::Rational;

/// Draws index `i` with probability `weights[i] / sum(weights)`, exactly.
///
/// A uniform integer below the common denominator of the normalized weights
/// is compared against cumulative numerators, so no floating-point rounding
/// enters the draw.
pub fn choose<R: Rng + ?Sized>(rng: &mut R, weights: &[Rational]) -> usize {
    assert!(!weights.is_empty(), "no outcomes to choose from");
    if weights.len() == 1 {
        return 0;
    }
    let lcm = weights
        .iter()
        .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
    let scaled: Vec<BigInt> = weights
        .iter()
        .map(|w| w.numer() * (&lcm / w.denom()))
        .collect();
    let total: BigInt = scaled.iter().sum();
    assert!(total > BigInt::zero(), "weights sum to zero");
    let total_u = total.to_biguint().expect("positive");
    let u = BigInt::from_biguint(Sign::Plus, rng.gen_biguint_below(&total_u));
    let mut acc = BigInt::zero();
    for (i, s) in scaled.iter().enumerate() {
        acc += s;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: &Rational) -> bool {
    if p.is_zero() {
        return false;
    }
    if p.is_one() {
        return true;
    }
    choose(rng, &[p.complement(), p.clone()]) == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn skips_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let i = choose(&mut rng, &[Rational::zero(), Rational::frac(1, 3), Rational::zero()]);
            assert_eq!(i, 1);
        }
    }

    #[test]
    fn frequencies_roughly_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = [Rational::frac(1, 4), Rational::frac(3, 4)];
        let ones = (0..4000).filter(|_| choose(&mut rng, &w) == 1).count();
        assert!((2850..3150).contains(&ones), "{ones}");
    }
}
