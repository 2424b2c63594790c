//! Multilinear polynomials and rational functions on the Boolean cube.
//!
//! Variables are indexed from 0. A point of the cube is a `&[bool]` with
//! `x[i]` the value of variable `i`; truth tables index points by the
//! integer whose bit `i` is `x[i]`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::Rational;

/// Subset of variables as a bitmask.
pub type Monomial = u64;

pub fn point(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (index >> i) & 1 == 1).collect()
}

pub fn index_of(x: &[bool]) -> usize {
    x.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (usize::from(b) << i))
}

/// Bitstring text (character `i` is `x[i]`) to a point.
pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Parse(format!("bad bit {c:?} in {s:?}"))),
        })
        .collect()
}

pub fn format_bits(x: &[bool]) -> String {
    x.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultilinearPoly {
    n: usize,
    coeffs: BTreeMap<Monomial, Rational>,
}

impl MultilinearPoly {
    pub fn zero(n: usize) -> Self {
        assert!(n <= 64, "at most 64 variables");
        MultilinearPoly {
            n,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: Rational) -> Self {
        let mut p = Self::zero(n);
        p.add_term(0, c);
        p
    }

    pub fn var(n: usize, i: usize) -> Self {
        assert!(i < n);
        let mut p = Self::zero(n);
        p.add_term(1 << i, Rational::one());
        p
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut p = Self::zero(n);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        assert!(self.n == 64 || m >> self.n == 0, "monomial outside variable range");
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(m).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(&m);
        }
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (Monomial, &Rational)> {
        self.coeffs.iter().map(|(&m, c)| (m, c))
    }

    pub fn coeff(&self, m: Monomial) -> Rational {
        self.coeffs.get(&m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest monomial size with a nonzero coefficient; 0 for the zero
    /// polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs
            .keys()
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Variables appearing in some monomial.
    pub fn support(&self) -> Monomial {
        self.coeffs.keys().fold(0, |acc, m| acc | m)
    }

    pub fn eval(&self, x: &[bool]) -> Rational {
        let mask = index_of(x) as Monomial;
        self.coeffs
            .iter()
            .filter(|(&m, _)| m & mask == m)
            .map(|(_, c)| c)
            .sum()
    }

    /// Values on every point of the cube, indexed as in [`point`].
    pub fn table(&self) -> Vec<Rational> {
        (0..1usize << self.n).map(|i| self.eval(&point(i, self.n))).collect()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::from_terms(self.n, self.terms().map(|(m, v)| (m, v * c)))
    }

    /// Product reduced with `x_i^2 = x_i`, which agrees with the true
    /// product everywhere on the cube.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zero(self.n);
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                out.add_term(a | b, ca * cb);
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&Rational::from(-1)))
    }

    /// Relabels variable `i` as `offset + i` in a space of `n` variables.
    pub fn embed(&self, n: usize, offset: usize) -> Self {
        assert!(offset + self.n <= n);
        Self::from_terms(n, self.terms().map(|(m, c)| (m << offset, c.clone())))
    }

    pub fn parse(n: usize, s: &str) -> Result<Self> {
        let mut p = Self::zero(n);
        let s = s.trim();
        if s == "0" || s.is_empty() {
            return Ok(p);
        }
        for term in s.split(" + ") {
            let (c, set) = term
                .trim()
                .split_once('*')
                .ok_or_else(|| Error::Parse(format!("term {term:?} is not coef*{{...}}")))?;
            let c: Rational = c.trim().parse()?;
            let inner = set
                .trim()
                .strip_prefix('{')
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(|| Error::Parse(format!("bad variable set {set:?}")))?;
            let mut m: Monomial = 0;
            for v in inner.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                let i: usize = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad variable {v:?}")))?;
                if i >= n {
                    return Err(Error::Parse(format!("variable {i} out of range for n={n}")));
                }
                m |= 1 << i;
            }
            p.add_term(m, c);
        }
        Ok(p)
    }
}

impl fmt::Display for MultilinearPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        // Lower degree first, then by variable set.
        let mut terms: Vec<_> = self.terms().collect();
        let vars = |m: Monomial| -> Vec<usize> { (0..64).filter(|i| (m >> i) & 1 == 1).collect() };
        terms.sort_by_key(|(m, _)| (m.count_ones(), vars(*m)));
        for (k, (m, c)) in terms.into_iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            let names: Vec<String> = vars(m).iter().map(|i| i.to_string()).collect();
            write!(f, "{c}*{{{}}}", names.join(","))?;
        }
        Ok(())
    }
}

/// The unique multilinear polynomial through `values` (indexed as in
/// [`point`]), by the Moebius transform.
pub fn interpolate_multilinear(values: &[Rational]) -> Result<MultilinearPoly> {
    let len = values.len();
    if !len.is_power_of_two() {
        return Err(Error::Domain(format!("table of {len} values is not a full cube")));
    }
    let n = len.trailing_zeros() as usize;
    let mut a = values.to_vec();
    for i in 0..n {
        let bit = 1 << i;
        for mask in 0..len {
            if mask & bit != 0 {
                let lower = a[mask ^ bit].clone();
                a[mask] -= lower;
            }
        }
    }
    Ok(MultilinearPoly::from_terms(
        n,
        a.into_iter().enumerate().map(|(m, c)| (m as Monomial, c)),
    ))
}

/// `P / Q` with `Q` nonzero on the whole cube.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalFunction {
    p: MultilinearPoly,
    q: MultilinearPoly,
}

impl RationalFunction {
    pub fn new(p: MultilinearPoly, q: MultilinearPoly) -> Result<Self> {
        if p.vars() != q.vars() {
            return Err(Error::Domain("numerator and denominator differ in arity".into()));
        }
        if let Some(x) = zero_of(&q) {
            return Err(Error::Domain(format!(
                "denominator vanishes at x={}",
                format_bits(&x)
            )));
        }
        Ok(RationalFunction { p, q })
    }

    pub fn polynomial(p: MultilinearPoly) -> Self {
        let n = p.vars();
        RationalFunction {
            p,
            q: MultilinearPoly::constant(n, Rational::one()),
        }
    }

    pub fn constant(n: usize, c: Rational) -> Self {
        Self::polynomial(MultilinearPoly::constant(n, c))
    }

    pub fn numerator(&self) -> &MultilinearPoly {
        &self.p
    }

    pub fn denominator(&self) -> &MultilinearPoly {
        &self.q
    }

    pub fn vars(&self) -> usize {
        self.p.vars()
    }

    pub fn degree(&self) -> usize {
        self.p.degree().max(self.q.degree())
    }

    pub fn eval(&self, x: &[bool]) -> Rational {
        self.p
            .eval(x)
            .checked_div(&self.q.eval(x))
            .expect("denominator nonzero on the cube")
    }

    pub fn embed(&self, n: usize, offset: usize) -> Self {
        RationalFunction {
            p: self.p.embed(n, offset),
            q: self.q.embed(n, offset),
        }
    }

    /// `self * other`, denominators multiplied.
    pub fn mul(&self, other: &Self) -> Self {
        RationalFunction {
            p: self.p.mul(&other.p),
            q: self.q.mul(&other.q),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        RationalFunction {
            p: self.p.mul(&other.q).add(&other.p.mul(&self.q)),
            q: self.q.mul(&other.q),
        }
    }

    /// `1 - self`.
    pub fn complement(&self) -> Self {
        RationalFunction {
            p: self.q.sub(&self.p),
            q: self.q.clone(),
        }
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P: {} | Q: {}", self.p, self.q)
    }
}

/// A point where `q` vanishes, searching only over `q`'s own variables.
fn zero_of(q: &MultilinearPoly) -> Option<Vec<bool>> {
    let support = q.support();
    let vars: Vec<usize> = (0..q.vars()).filter(|i| (support >> i) & 1 == 1).collect();
    (0..1u64 << vars.len()).find_map(|k| {
        let mut x = vec![false; q.vars()];
        for (j, &v) in vars.iter().enumerate() {
            x[v] = (k >> j) & 1 == 1;
        }
        q.eval(&x).is_zero().then_some(x)
    })
}

/// A Boolean function as a full table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    n: usize,
    values: Vec<bool>,
}

impl TruthTable {
    pub fn new(n: usize, values: Vec<bool>) -> Result<Self> {
        if values.len() != 1 << n {
            return Err(Error::InputLength {
                expected: 1 << n,
                got: values.len(),
            });
        }
        Ok(TruthTable { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(&[bool]) -> bool) -> Self {
        TruthTable {
            n,
            values: (0..1usize << n).map(|i| f(&point(i, n))).collect(),
        }
    }

    pub fn and(n: usize) -> Self {
        Self::from_fn(n, |x| x.iter().all(|&b| b))
    }

    pub fn or(n: usize) -> Self {
        Self::from_fn(n, |x| x.iter().any(|&b| b))
    }

    pub fn xor(n: usize) -> Self {
        Self::from_fn(n, |x| x.iter().filter(|&&b| b).count() % 2 == 1)
    }

    pub fn majority(n: usize) -> Self {
        Self::from_fn(n, |x| 2 * x.iter().filter(|&&b| b).count() > n)
    }

    pub fn constant(n: usize, b: bool) -> Self {
        Self::from_fn(n, |_| b)
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn eval(&self, x: &[bool]) -> bool {
        self.values[index_of(x)]
    }

    pub fn as_rationals(&self) -> Vec<Rational> {
        self.values.iter().map(|&b| Rational::from(i64::from(b))).collect()
    }

    /// Degree of the multilinear extension.
    pub fn degree(&self) -> usize {
        interpolate_multilinear(&self.as_rationals())
            .expect("full cube")
            .degree()
    }

    /// Reads lines `"<bits> <0|1>"`; every point must appear once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (bits, val) = match (it.next(), it.next(), it.next()) {
                (Some(b), Some(v), None) => (b, v),
                _ => {
                    return Err(Error::Syntax {
                        line: k + 1,
                        message: "expected `<bits> <0|1>`".into(),
                    })
                }
            };
            let x = parse_bits(bits)?;
            let v = match val {
                "0" => false,
                "1" => true,
                _ => {
                    return Err(Error::Syntax {
                        line: k + 1,
                        message: format!("value {val:?} is not 0 or 1"),
                    })
                }
            };
            rows.push((x, v));
        }
        let n = rows.first().map(|(x, _)| x.len()).unwrap_or(0);
        let mut values = vec![None; 1 << n];
        for (x, v) in rows {
            if x.len() != n {
                return Err(Error::Parse("rows have different lengths".into()));
            }
            let slot = &mut values[index_of(&x)];
            if slot.replace(v).is_some() {
                return Err(Error::Parse(format!("duplicate row {}", format_bits(&x))));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("missing row {}", format_bits(&point(i, n))))))
            .collect::<Result<Vec<bool>>>()?;
        Ok(TruthTable { n, values })
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.values.iter().enumerate() {
            writeln!(f, "{} {}", format_bits(&point(i, self.n)), u8::from(*v))?;
        }
        Ok(())
    }
}

/// Reads a complete table of rational values, lines `"<bits> <num>/<den>"`,
/// into values indexed by point.
pub fn parse_value_table(text: &str) -> Result<(usize, Vec<Rational>)> {
    let mut n = None;
    let mut values: Vec<Option<Rational>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |m: String| Error::Syntax { line: k + 1, message: m };
        let mut it = line.split_whitespace();
        let (Some(bits), Some(val), None) = (it.next(), it.next(), it.next()) else {
            return Err(syntax("expected `<bits> <value>`".into()));
        };
        let x = parse_bits(bits).map_err(|e| syntax(e.to_string()))?;
        let v: Rational = val.parse().map_err(|e: Error| syntax(e.to_string()))?;
        let width = *n.get_or_insert(x.len());
        if x.len() != width {
            return Err(syntax("bitstrings differ in length".into()));
        }
        if width > 20 {
            return Err(Error::Limit(format!("{width} variables is too many for a table")));
        }
        values.resize(1 << width, None);
        let slot = &mut values[index_of(&x)];
        if slot.is_some() {
            return Err(syntax(format!("point {bits} listed twice")));
        }
        *slot = Some(v);
    }
    let n = n.ok_or(Error::Syntax { line: 0, message: "empty table".into() })?;
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| Error::Parse(format!("missing point {}", format_bits(&point(i, n)))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((n, values))
}
