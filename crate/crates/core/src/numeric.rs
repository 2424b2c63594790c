//! Exact numbers: rationals for probabilities and `mantissa / sqrt(2)^h`
//! values for amplitudes of Hadamard/Toffoli circuits.

use std::cmp::Ordering;
use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// An exact rational number, always kept in lowest terms with a positive
/// denominator. Renders as `num/den`, including integers (`1/1`).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self> {
        let den = den.into();
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Rational(BigRational::new(num.into(), den)))
    }

    /// Panics on a zero denominator; for literals in code and tests.
    pub fn frac(num: i64, den: i64) -> Self {
        Self::new(num, den).expect("nonzero denominator")
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// `1 / 2^k`.
    pub fn pow2_inv(k: u32) -> Self {
        Rational(BigRational::new(BigInt::one(), BigInt::one() << k as usize))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn checked_div(&self, rhs: &Rational) -> Result<Rational> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Rational(&self.0 / &rhs.0))
    }

    pub fn recip(&self) -> Result<Rational> {
        Rational::one().checked_div(self)
    }

    /// `1 - self`.
    pub fn complement(&self) -> Rational {
        Rational(BigRational::one() - &self.0)
    }

    pub fn pow(&self, exp: u32) -> Rational {
        let mut acc = Rational::one();
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    /// Clamps into `[0, 1]`.
    pub fn clamp_unit(&self) -> Rational {
        if self.0.is_negative() {
            Rational::zero()
        } else if self.0 > BigRational::one() {
            Rational::one()
        } else {
            self.clone()
        }
    }

    /// True when the denominator is a power of two.
    pub fn is_dyadic(&self) -> bool {
        let d = self.0.denom().magnitude();
        (d & (d - BigUint::one())).is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn ceil_to_integer(&self) -> BigInt {
        self.0.ceil().to_integer()
    }

    pub fn min(self, other: Rational) -> Rational {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Rational) -> Rational {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `a/b`, a bare integer `a`, or a finite decimal like `0.25`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a rational number: {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            return Rational::new(n, d);
        }
        if let Some((whole, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = whole.starts_with('-');
            let whole: BigInt = match whole {
                "" | "-" | "+" => BigInt::zero(),
                w => w.parse().map_err(|_| bad())?,
            };
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let frac: BigInt = frac.parse().map_err(|_| bad())?;
            let magnitude = whole.abs() * &scale + frac;
            let num = if negative { -magnitude } else { magnitude };
            return Rational::new(num, scale);
        }
        let n: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Rational::from_integer(n))
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl From<BigRational> for Rational {
    fn from(r: BigRational) -> Self {
        Rational(r)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident) => {
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl $assign_trait<Rational> for Rational {
            fn $assign_method(&mut self, rhs: Rational) {
                self.0.$assign_method(rhs.0);
            }
        }
        impl<'a> $assign_trait<&'a Rational> for Rational {
            fn $assign_method(&mut self, rhs: &'a Rational) {
                self.0.$assign_method(&rhs.0);
            }
        }
    };
}

forward_binop!(Add, add, AddAssign, add_assign);
forward_binop!(Sub, sub, SubAssign, sub_assign);
forward_binop!(Mul, mul, MulAssign, mul_assign);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl<'a> Neg for &'a Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::one(), |a, b| a * b)
    }
}

/// The real number `mantissa / sqrt(2)^half_exponent`.
///
/// Every amplitude reachable from `|0...0>` with Hadamard, Toffoli and X has
/// this form, with `half_exponent` at most the number of Hadamards applied.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SqrtDyadic {
    mantissa: BigInt,
    half_exponent: u32,
}

impl SqrtDyadic {
    /// Builds a canonical value.
    pub fn new(mantissa: impl Into<BigInt>, half_exponent: u32) -> Self {
        let mut v = SqrtDyadic {
            mantissa: mantissa.into(),
            half_exponent,
        };
        v.canonicalize();
        v
    }

    pub fn zero() -> Self {
        SqrtDyadic {
            mantissa: BigInt::zero(),
            half_exponent: 0,
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn half_exponent(&self) -> u32 {
        self.half_exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    /// Strips factors of two (`2 = sqrt(2)^2`) while the exponent allows.
    /// Idempotent; zero becomes `(0, 0)`.
    pub fn canonicalize(&mut self) {
        if self.mantissa.is_zero() {
            self.half_exponent = 0;
            return;
        }
        let twos = self.mantissa.trailing_zeros().unwrap_or(0);
        let strip = twos.min(u64::from(self.half_exponent / 2)) as u32;
        if strip > 0 {
            self.mantissa >>= strip as usize;
            self.half_exponent -= 2 * strip;
        }
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    /// Exact sum. The half-exponents must have equal parity unless one side
    /// is zero; mixed parity would need an irrational `sqrt(2)` coefficient.
    pub fn checked_add(&self, rhs: &SqrtDyadic) -> Result<SqrtDyadic> {
        if self.is_zero() {
            return Ok(rhs.clone().canonical());
        }
        if rhs.is_zero() {
            return Ok(self.clone().canonical());
        }
        if self.half_exponent % 2 != rhs.half_exponent % 2 {
            return Err(Error::ParityMismatch {
                left: self.half_exponent,
                right: rhs.half_exponent,
            });
        }
        let h = self.half_exponent.max(rhs.half_exponent);
        let lift = |v: &SqrtDyadic| &v.mantissa << ((h - v.half_exponent) / 2) as usize;
        Ok(SqrtDyadic::new(lift(self) + lift(rhs), h))
    }

    /// `mantissa^2 / 2^half_exponent`, the measurement probability of an
    /// amplitude of this value.
    pub fn prob(&self) -> Rational {
        let num = &self.mantissa * &self.mantissa;
        Rational(BigRational::new(num, BigInt::one() << self.half_exponent as usize))
    }

    /// Exact comparison against a rational.
    pub fn cmp_rational(&self, r: &Rational) -> Ordering {
        let lhs_sign = self.mantissa.sign();
        let rhs_sign = r.numer().sign();
        let rank = |s: Sign| match s {
            Sign::Minus => 0,
            Sign::NoSign => 1,
            Sign::Plus => 2,
        };
        if rank(lhs_sign) != rank(rhs_sign) {
            return rank(lhs_sign).cmp(&rank(rhs_sign));
        }
        if lhs_sign == Sign::NoSign {
            return Ordering::Equal;
        }
        // Same sign: compare squares, scaled to avoid the square root.
        // |m|/sqrt(2)^h vs |p|/q  <=>  m^2 q^2 vs p^2 2^h.
        let lhs = &self.mantissa * &self.mantissa * r.denom() * r.denom();
        let rhs = r.numer() * r.numer() * (BigInt::one() << self.half_exponent as usize);
        let mag = lhs.cmp(&rhs);
        if lhs_sign == Sign::Minus {
            mag.reverse()
        } else {
            mag
        }
    }

    /// Nearest `f64`, for reports.
    pub fn to_f64(&self) -> f64 {
        let m = self.mantissa.to_f64().unwrap_or(f64::NAN);
        m / 2f64.sqrt().powi(self.half_exponent as i32)
    }
}

impl fmt::Display for SqrtDyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/sqrt2^{}", self.mantissa, self.half_exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sd(m: i64, h: u32) -> SqrtDyadic {
        SqrtDyadic::new(m, h)
    }

    #[test]
    fn sqrtdyadic_add_examples() {
        assert_eq!(sd(1, 2).checked_add(&sd(1, 2)).unwrap(), sd(1, 0));
        let z = sd(3, 4).checked_add(&sd(-3, 4)).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.half_exponent(), 0);
        // 1/sqrt2 + 1/(2 sqrt2) = 3/(2 sqrt2): lift (1,1) to (2,3), add (1,3).
        assert_eq!(sd(1, 1).checked_add(&sd(1, 3)).unwrap(), sd(3, 3));
    }

    #[test]
    fn parity_mismatch_is_rejected() {
        assert!(matches!(
            sd(1, 1).checked_add(&sd(1, 2)),
            Err(Error::ParityMismatch { .. })
        ));
        // Zero is compatible with anything.
        assert_eq!(SqrtDyadic::zero().checked_add(&sd(1, 1)).unwrap(), sd(1, 1));
    }

    #[test]
    fn prob_examples() {
        assert_eq!(sd(1, 1).prob(), Rational::frac(1, 2));
        assert_eq!(sd(0, 0).prob(), Rational::zero());
        assert_eq!(sd(-3, 4).prob(), Rational::frac(9, 16));
    }

    #[test]
    fn rational_examples() {
        let third = Rational::frac(1, 3);
        assert_eq!(&third + &Rational::frac(1, 6), Rational::frac(1, 2));
        let two_thirds = Rational::frac(2, 3);
        assert_eq!(two_thirds.checked_div(&two_thirds).unwrap(), Rational::one());
        assert_eq!(Rational::one().to_string(), "1/1");
        // Majority of three independent 2/3 coins, summed over the four
        // winning outcome triples: 8/27 + 3 * 4/27 = 20/27.
        let p = &two_thirds;
        let q = p.complement();
        let maj = p.pow(3) + Rational::from(3) * p.pow(2) * &q;
        assert_eq!(maj, Rational::frac(20, 27));
        assert!(matches!(
            p.checked_div(&Rational::zero()),
            Err(Error::DivisionByZero)
        ));
    }

    #[test]
    fn parse_rationals() {
        assert_eq!("9/16".parse::<Rational>().unwrap(), Rational::frac(9, 16));
        assert_eq!("-3".parse::<Rational>().unwrap(), Rational::from(-3));
        assert_eq!("0.25".parse::<Rational>().unwrap(), Rational::frac(1, 4));
        assert_eq!("-1.5".parse::<Rational>().unwrap(), Rational::frac(-3, 2));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
    }

    #[test]
    fn cmp_rational_handles_irrational_values() {
        // 1/sqrt2 ~ 0.7071
        let v = sd(1, 1);
        assert_eq!(v.cmp_rational(&Rational::frac(7, 10)), Ordering::Greater);
        assert_eq!(v.cmp_rational(&Rational::frac(71, 100)), Ordering::Less);
        assert_eq!(sd(-1, 1).cmp_rational(&Rational::frac(-71, 100)), Ordering::Greater);
        assert_eq!(sd(1, 2).cmp_rational(&Rational::frac(1, 2)), Ordering::Equal);
        assert_eq!(sd(0, 0).cmp_rational(&Rational::zero()), Ordering::Equal);
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(m in -1000i64..1000, h in 0u32..40) {
            let once = sd(m, h);
            prop_assert_eq!(once.clone().canonical(), once.clone());
            prop_assert_eq!(once.prob(), SqrtDyadic { mantissa: m.into(), half_exponent: h }.prob());
        }

        #[test]
        fn prob_is_nonnegative_and_dyadic(m in -1000i64..1000, h in 0u32..40) {
            let p = sd(m, h).prob();
            prop_assert!(!p.is_negative());
            prop_assert_eq!(p.is_zero(), m == 0);
            prop_assert!(p.is_dyadic());
        }

        #[test]
        fn rational_sums_are_association_free(
            xs in proptest::collection::vec((-50i64..50, 1i64..50), 1..8)
        ) {
            let rs: Vec<Rational> = xs.iter().map(|&(n, d)| Rational::frac(n, d)).collect();
            let forward: Rational = rs.iter().sum();
            let backward: Rational = rs.iter().rev().sum();
            let prod_f: Rational = rs.iter().cloned().product();
            let prod_b: Rational = rs.iter().rev().cloned().product();
            prop_assert_eq!(forward, backward);
            prop_assert_eq!(prod_f, prod_b);
        }

        #[test]
        fn sqrtdyadic_add_matches_rational_squares(a in -50i64..50, b in -50i64..50, ha in 0u32..6, hb in 0u32..6) {
            // Same parity only; compare against exact rational arithmetic on
            // the even part (value * sqrt2^(h mod 2)).
            let hb = hb - (hb % 2) + (ha % 2);
            let s = sd(a, ha).checked_add(&sd(b, hb)).unwrap();
            let parity = ha % 2;
            let as_rational = |m: i64, h: u32| Rational::new(m, BigInt::one() << ((h - parity) / 2) as usize).unwrap();
            let expected = as_rational(a, ha) + as_rational(b, hb);
            let got = if s.is_zero() {
                Rational::zero()
            } else {
                prop_assert_eq!(s.half_exponent() % 2, parity);
                as_rational(0, parity) + Rational::new(s.mantissa().clone(), BigInt::one() << ((s.half_exponent() - parity) / 2) as usize).unwrap()
            };
            prop_assert_eq!(got, expected);
        }
    }
}
