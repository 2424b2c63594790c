//! Explicit distributions over bitstrings, k-term probabilities and the
//! acceptance ratio of classical postselection strategies.

pub mod forrelation;

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::Rational;
use crate::query::poly::{format_bits, parse_bits, point};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitDistribution {
    n: usize,
    weights: BTreeMap<Vec<bool>, Rational>,
}

impl ExplicitDistribution {
    /// Zero weights are dropped; the rest must be positive and sum to 1.
    pub fn new(n: usize, weights: impl IntoIterator<Item = (Vec<bool>, Rational)>) -> Result<Self> {
        let mut map: BTreeMap<Vec<bool>, Rational> = BTreeMap::new();
        for (x, w) in weights {
            if x.len() != n {
                return Err(Error::InputLength {
                    expected: n,
                    got: x.len(),
                });
            }
            if w.is_negative() {
                return Err(Error::Domain(format!("negative weight {w} on {}", format_bits(&x))));
            }
            *map.entry(x).or_insert_with(Rational::zero) += w;
        }
        map.retain(|_, w| !w.is_zero());
        let total: Rational = map.values().sum();
        if !total.is_one() {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        Ok(ExplicitDistribution { n, weights: map })
    }

    pub fn uniform(n: usize) -> Self {
        let w = Rational::pow2_inv(n as u32);
        Self::new(n, (0..1usize << n).map(|i| (point(i, n), w.clone()))).expect("uniform")
    }

    pub fn point_mass(x: Vec<bool>) -> Self {
        let n = x.len();
        Self::new(n, [(x, Rational::one())]).expect("point mass")
    }

    /// Normalizes nonnegative integer weights indexed by point.
    pub fn from_counts(n: usize, counts: &[u64]) -> Result<Self> {
        if counts.len() != 1 << n {
            return Err(Error::InputLength {
                expected: 1 << n,
                got: counts.len(),
            });
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Domain("all weights are zero".into()));
        }
        Self::new(
            n,
            counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (point(i, n), Rational::frac(c as i64, total as i64))),
        )
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> impl Iterator<Item = (&Vec<bool>, &Rational)> {
        self.weights.iter()
    }

    pub fn prob(&self, x: &[bool]) -> Rational {
        self.weights.get(x).cloned().unwrap_or_else(Rational::zero)
    }

    /// Reads lines `<bitstring> <num>/<den>`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut entries = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |m: String| Error::Syntax {
                line: k + 1,
                message: m,
            };
            let mut parts = line.split_whitespace();
            let (Some(bits), Some(w), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(syntax("expected `<bitstring> <weight>`".into()));
            };
            let x = parse_bits(bits).map_err(|e| syntax(e.to_string()))?;
            let w: Rational = w.parse().map_err(|e: Error| syntax(e.to_string()))?;
            if *n.get_or_insert(x.len()) != x.len() {
                return Err(syntax("bitstrings differ in length".into()));
            }
            entries.push((x, w));
        }
        let n = n.ok_or(Error::Syntax {
            line: 0,
            message: "empty distribution".into(),
        })?;
        Self::new(n, entries)
    }
}

impl fmt::Display for ExplicitDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, w) in &self.weights {
            writeln!(f, "{} {w}", format_bits(x))?;
        }
        Ok(())
    }
}

/// A conjunction of literals: `(i, true)` is `z_i`, `(i, false)` is
/// `1 - z_i`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct KTerm {
    literals: Vec<(usize, bool)>,
}

impl KTerm {
    pub fn new(mut literals: Vec<(usize, bool)>) -> Result<Self> {
        literals.sort_unstable();
        if literals.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain("k-term repeats an index".into()));
        }
        Ok(KTerm { literals })
    }

    pub fn literals(&self) -> &[(usize, bool)] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn holds(&self, x: &[bool]) -> bool {
        self.literals.iter().all(|&(i, b)| x[i] == b)
    }
}

impl fmt::Display for KTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .literals
            .iter()
            .map(|&(i, b)| if b { format!("z{i}") } else { format!("(1-z{i})") })
            .collect();
        f.write_str(&parts.join(""))
    }
}

pub fn kterm_prob(d: &ExplicitDistribution, c: &KTerm) -> Rational {
    d.weights().filter(|(x, _)| c.holds(x)).map(|(_, w)| w).sum()
}

/// Every k-term over `n` variables.
pub fn all_kterms(n: usize, k: usize) -> Vec<KTerm> {
    let mut out = Vec::new();
    for mask in 0u64..1 << n {
        if mask.count_ones() as usize != k {
            continue;
        }
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        for pol in 0u64..1 << k {
            let lits = idx.iter().enumerate().map(|(j, &i)| (i, pol >> j & 1 == 1)).collect();
            out.push(KTerm { literals: lits });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Epsilon {
    Finite(Rational),
    /// Some k-term has probability zero under `D1` and not under `D0`.
    Incomparable(KTerm),
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Epsilon::Finite(e) => write!(f, "{e}"),
            Epsilon::Incomparable(c) => write!(f, "incomparable ({c})"),
        }
    }
}

/// Largest `|Pr_D0[C] / Pr_D1[C] - 1|` over k-terms `C`. Terms with
/// probability zero under both are skipped.
pub fn kwise_epsilon(d0: &ExplicitDistribution, d1: &ExplicitDistribution, k: usize) -> Result<Epsilon> {
    if d0.vars() != d1.vars() {
        return Err(Error::InputLength {
            expected: d0.vars(),
            got: d1.vars(),
        });
    }
    if k > d0.vars() {
        return Err(Error::Domain(format!("k = {k} exceeds n = {}", d0.vars())));
    }
    let mut eps = Rational::zero();
    for c in all_kterms(d0.vars(), k) {
        let p0 = kterm_prob(d0, &c);
        let p1 = kterm_prob(d1, &c);
        if p1.is_zero() {
            if p0.is_zero() {
                continue;
            }
            return Ok(Epsilon::Incomparable(c));
        }
        let dev = (p0.checked_div(&p1)? - Rational::one()).abs();
        eps = eps.max(dev);
    }
    Ok(Epsilon::Finite(eps))
}

/// Adaptive query tree with leaf values `p` (postselection succeeds) and
/// `o` (output 1 and postselection succeeds).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassicalPostStrategy {
    Leaf { p: Rational, o: Rational },
    Query {
        index: usize,
        zero: Box<ClassicalPostStrategy>,
        one: Box<ClassicalPostStrategy>,
    },
}

impl ClassicalPostStrategy {
    pub fn leaf(p: Rational, o: Rational) -> Self {
        ClassicalPostStrategy::Leaf { p, o }
    }

    pub fn query(index: usize, zero: Self, one: Self) -> Self {
        ClassicalPostStrategy::Query {
            index,
            zero: Box::new(zero),
            one: Box::new(one),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ClassicalPostStrategy::Leaf { .. } => 0,
            ClassicalPostStrategy::Query { zero, one, .. } => 1 + zero.depth().max(one.depth()),
        }
    }

    /// Leaf values in `0 <= o <= p <= 1`, indices below `n` and distinct
    /// along every path.
    pub fn validate(&self, n: usize) -> Result<()> {
        fn go(s: &ClassicalPostStrategy, n: usize, seen: &mut Vec<usize>) -> Result<()> {
            match s {
                ClassicalPostStrategy::Leaf { p, o } => {
                    if o.is_negative() || o > p || *p > Rational::one() {
                        return Err(Error::Domain(format!("leaf values must satisfy 0 <= o <= p <= 1, got p={p} o={o}")));
                    }
                    Ok(())
                }
                ClassicalPostStrategy::Query { index, zero, one } => {
                    if *index >= n {
                        return Err(Error::Domain(format!("query index {index} out of range")));
                    }
                    if seen.contains(index) {
                        return Err(Error::Domain(format!("index {index} queried twice on one path")));
                    }
                    seen.push(*index);
                    go(zero, n, seen)?;
                    go(one, n, seen)?;
                    seen.pop();
                    Ok(())
                }
            }
        }
        go(self, n, &mut Vec::new())
    }

    pub fn leaf_at(&self, x: &[bool]) -> (&Rational, &Rational) {
        match self {
            ClassicalPostStrategy::Leaf { p, o } => (p, o),
            ClassicalPostStrategy::Query { index, zero, one } => {
                if x[*index] { one.leaf_at(x) } else { zero.leaf_at(x) }
            }
        }
    }

    /// Every leaf with the k-term of answers that reaches it.
    pub fn paths(&self) -> Vec<(KTerm, &Rational, &Rational)> {
        fn go<'a>(s: &'a ClassicalPostStrategy, lits: &mut Vec<(usize, bool)>, out: &mut Vec<(KTerm, &'a Rational, &'a Rational)>) {
            match s {
                ClassicalPostStrategy::Leaf { p, o } => {
                    out.push((KTerm::new(lits.clone()).expect("distinct on paths"), p, o));
                }
                ClassicalPostStrategy::Query { index, zero, one } => {
                    for (b, child) in [(false, zero), (true, one)] {
                        lits.push((*index, b));
                        go(child, lits, out);
                        lits.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for ClassicalPostStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassicalPostStrategy::Leaf { p, o } => write!(f, "leaf(p={p}, o={o})"),
            ClassicalPostStrategy::Query { index, zero, one } => {
                write!(f, "z{index} ? {one} : {zero}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Acceptance {
    pub post: Rational,
    pub out: Rational,
    /// `out / post`.
    pub ratio: Rational,
}

/// Expected leaf values under `d` and their ratio.
pub fn strategy_acceptance(d: &ExplicitDistribution, s: &ClassicalPostStrategy) -> Result<Acceptance> {
    s.validate(d.vars())?;
    let mut post = Rational::zero();
    let mut out = Rational::zero();
    for (x, w) in d.weights() {
        let (p, o) = s.leaf_at(x);
        post += w * p;
        out += w * o;
    }
    if post.is_zero() {
        return Err(Error::Domain("postselection has probability zero".into()));
    }
    let ratio = out.checked_div(&post)?;
    Ok(Acceptance { post, out, ratio })
}

/// `[(1 - e)/(1 + e), (1 + e)/(1 - e)]`; the upper end is `None` (unbounded)
/// once `e >= 1`.
pub fn ratio_window(eps: &Rational) -> (Rational, Option<Rational>) {
    let one = Rational::one();
    let lower = (one.clone() - eps)
        .checked_div(&(one.clone() + eps))
        .expect("positive")
        .max(Rational::zero());
    let upper = if *eps < one {
        Some((one.clone() + eps).checked_div(&(one - eps)).expect("positive"))
    } else {
        None
    };
    (lower, upper)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatioCheck {
    pub holds: bool,
    pub eps: Rational,
    pub a0: Rational,
    pub a1: Rational,
    /// `a1 / a0`, absent when both are zero.
    pub ratio: Option<Rational>,
    pub lower: Rational,
    pub upper: Option<Rational>,
}

impl fmt::Display for RatioCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |r: &Option<Rational>, none: &str| r.as_ref().map_or(none.to_string(), |v| v.to_string());
        writeln!(f, "eps\t{}", self.eps)?;
        writeln!(f, "a0\t{}", self.a0)?;
        writeln!(f, "a1\t{}", self.a1)?;
        writeln!(f, "ratio\t{}", show(&self.ratio, "undefined"))?;
        writeln!(f, "window\t[{}, {}]", self.lower, show(&self.upper, "inf"))?;
        writeln!(f, "holds\t{}", self.holds)
    }
}

/// Checks `a1/a0` against the window for the pair's k-wise parameter.
pub fn check_ratio_bound(
    d0: &ExplicitDistribution,
    d1: &ExplicitDistribution,
    k: usize,
    s: &ClassicalPostStrategy,
) -> Result<RatioCheck> {
    if s.depth() > k {
        return Err(Error::Domain(format!("strategy depth {} exceeds k = {k}", s.depth())));
    }
    let eps = match kwise_epsilon(d0, d1, k)? {
        Epsilon::Finite(e) => e,
        Epsilon::Incomparable(c) => {
            return Err(Error::Domain(format!("distributions are incomparable on {c}")))
        }
    };
    // Reversed roles: a term dead under D0 but alive under D1.
    if let Epsilon::Incomparable(c) = kwise_epsilon(d1, d0, k)? {
        return Err(Error::Domain(format!("distributions are incomparable on {c}")));
    }
    let a0 = strategy_acceptance(d0, s)?.ratio;
    let a1 = strategy_acceptance(d1, s)?.ratio;
    let (lower, upper) = ratio_window(&eps);
    let ratio = if a0.is_zero() {
        if !a1.is_zero() {
            return Err(Error::Invariant("a0 = 0 while a1 > 0 for comparable distributions".into()));
        }
        None
    } else {
        Some(a1.checked_div(&a0)?)
    };
    let holds = match &ratio {
        None => true,
        Some(r) => *r >= lower && upper.as_ref().map_or(true, |u| r <= u),
    };
    Ok(RatioCheck {
        holds,
        eps,
        a0,
        a1,
        ratio,
        lower,
        upper,
    })
}

/// Leaf grid used by the exhaustive strategy search, in quarters.
pub const GRID_QUARTERS: [i64; 5] = [0, 1, 2, 3, 4];

fn grid_leaves() -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for &p in &GRID_QUARTERS {
        for &o in &GRID_QUARTERS {
            if o <= p {
                out.push((p, o));
            }
        }
    }
    out
}

/// Integer weights `w(x) * L` for a common denominator `L` of both
/// distributions.
fn scaled(d0: &ExplicitDistribution, d1: &ExplicitDistribution) -> Option<(Vec<i128>, Vec<i128>)> {
    use num_integer::Integer;
    use num_traits::ToPrimitive;
    let n = d0.vars();
    let mut l = num_bigint::BigInt::from(1);
    for (_, w) in d0.weights().chain(d1.weights()) {
        l = l.lcm(w.denom());
    }
    let conv = |d: &ExplicitDistribution| -> Option<Vec<i128>> {
        (0..1usize << n)
            .map(|i| {
                let w = d.prob(&point(i, n));
                (w.numer() * (&l / w.denom())).to_i128()
            })
            .collect()
    };
    Some((conv(d0)?, conv(d1)?))
}

/// Shape of a depth-at-most-2 strategy: the root query and, for each
/// child, an optional second query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    Leaf,
    One(usize, [Option<usize>; 2]),
}

fn shapes(n: usize) -> Vec<Shape> {
    let mut out = vec![Shape::Leaf];
    for r in 0..n {
        let opts: Vec<Option<usize>> = std::iter::once(None).chain((0..n).filter(|&j| j != r).map(Some)).collect();
        for &a in &opts {
            for &b in &opts {
                out.push(Shape::One(r, [a, b]));
            }
        }
    }
    out
}

/// Leaf cells of a shape as point masks, in leaf order.
fn cells(shape: Shape, n: usize) -> Vec<Vec<usize>> {
    let pts = 0..1usize << n;
    let bit = |x: usize, i: usize| x >> i & 1 == 1;
    match shape {
        Shape::Leaf => vec![pts.collect()],
        Shape::One(r, kids) => {
            let mut out = Vec::new();
            for (b, kid) in [(false, kids[0]), (true, kids[1])] {
                let side: Vec<usize> = pts.clone().filter(|&x| bit(x, r) == b).collect();
                match kid {
                    None => out.push(side),
                    Some(j) => {
                        for b2 in [false, true] {
                            out.push(side.iter().copied().filter(|&x| bit(x, j) == b2).collect());
                        }
                    }
                }
            }
            out
        }
    }
}

fn shape_strategy(shape: Shape, leaves: &[(i64, i64)]) -> ClassicalPostStrategy {
    let q = |v: i64| Rational::frac(v, 4);
    let mut it = leaves.iter().map(|&(p, o)| ClassicalPostStrategy::leaf(q(p), q(o)));
    match shape {
        Shape::Leaf => it.next().expect("one leaf"),
        Shape::One(r, kids) => {
            let mut child = |kid: Option<usize>| match kid {
                None => it.next().expect("leaf"),
                Some(j) => {
                    let z = it.next().expect("leaf");
                    let o = it.next().expect("leaf");
                    ClassicalPostStrategy::query(j, z, o)
                }
            };
            let zero = child(kids[0]);
            let one = child(kids[1]);
            ClassicalPostStrategy::query(r, zero, one)
        }
    }
}

/// Outcome of the exhaustive depth-2 search on one pair.
#[derive(Clone, Debug)]
pub struct SearchReport {
    pub eps: Rational,
    pub strategies: u64,
    /// Strategies whose ratio left the window (must be zero).
    pub violations: u64,
    /// Strategy with the largest `a1/a0` and that ratio.
    pub best: Option<(ClassicalPostStrategy, Rational)>,
}

/// Runs every depth-at-most-2 strategy with leaf values on the quarter
/// grid over the pair and checks the window for each.
pub fn exhaustive_ratio_search(d0: &ExplicitDistribution, d1: &ExplicitDistribution) -> Result<SearchReport> {
    let n = d0.vars();
    let k = 2.min(n);
    let eps = match kwise_epsilon(d0, d1, k)? {
        Epsilon::Finite(e) => e,
        Epsilon::Incomparable(c) => return Err(Error::Domain(format!("incomparable on {c}"))),
    };
    if let Epsilon::Incomparable(c) = kwise_epsilon(d1, d0, k)? {
        return Err(Error::Domain(format!("incomparable on {c}")));
    }
    let (w0, w1) = scaled(d0, d1).ok_or(Error::Limit("weights too large for the fast path".into()))?;
    let (lower, upper) = ratio_window(&eps);
    use num_traits::ToPrimitive;
    let to = |r: &Rational| -> Option<(i128, i128)> { Some((r.numer().to_i128()?, r.denom().to_i128()?)) };
    let lo = to(&lower).ok_or(Error::Limit("window too large".into()))?;
    let hi = match &upper {
        Some(u) => Some(to(u).ok_or(Error::Limit("window too large".into()))?),
        None => None,
    };
    let leaves = grid_leaves();
    let mut strategies = 0u64;
    let mut violations = 0u64;
    // Best ratio as (num, den) of a1/a0.
    let mut best: Option<((i128, i128), Shape, Vec<(i64, i64)>)> = None;
    for shape in shapes(n) {
        let cs = cells(shape, n);
        let mass0: Vec<i128> = cs.iter().map(|c| c.iter().map(|&x| w0[x]).sum()).collect();
        let mass1: Vec<i128> = cs.iter().map(|c| c.iter().map(|&x| w1[x]).sum()).collect();
        let l = cs.len();
        let mut choice = vec![0usize; l];
        loop {
            let (mut p0, mut o0, mut p1, mut o1) = (0i128, 0i128, 0i128, 0i128);
            for (c, &ch) in choice.iter().enumerate() {
                let (p, o) = leaves[ch];
                p0 += mass0[c] * p as i128;
                o0 += mass0[c] * o as i128;
                p1 += mass1[c] * p as i128;
                o1 += mass1[c] * o as i128;
            }
            if p0 > 0 && p1 > 0 {
                strategies += 1;
                // a1/a0 = (o1 p0) / (p1 o0).
                let num = o1 * p0;
                let den = p1 * o0;
                if den == 0 {
                    if num != 0 {
                        violations += 1;
                    }
                } else {
                    let below = num * lo.1 < lo.0 * den;
                    let above = hi.is_some_and(|h| num * h.1 > h.0 * den);
                    if below || above {
                        violations += 1;
                    }
                    let better = best.as_ref().map_or(true, |((bn, bd), _, _)| num * bd > bn * den);
                    if better {
                        best = Some(((num, den), shape, choice.iter().map(|&c| leaves[c]).collect()));
                    }
                }
            }
            // Next assignment.
            let mut at = 0;
            loop {
                if at == l {
                    break;
                }
                choice[at] += 1;
                if choice[at] < leaves.len() {
                    break;
                }
                choice[at] = 0;
                at += 1;
            }
            if at == l {
                break;
            }
        }
    }
    let best = best.map(|((num, den), shape, vals)| {
        (
            shape_strategy(shape, &vals),
            Rational::new(num, den).expect("nonzero"),
        )
    });
    Ok(SearchReport {
        eps,
        strategies,
        violations,
        best,
    })
}

/// Random pair on `n` bits: `D0` with integer weights in `1..=8`, `D1`
/// the same weights scaled by factors in `[4/5, 6/5]` and renormalized.
pub fn random_close_pair<R: Rng>(n: usize, rng: &mut R) -> (ExplicitDistribution, ExplicitDistribution) {
    let base: Vec<u64> = (0..1 << n).map(|_| rng.gen_range(1..=8)).collect();
    let tilted: Vec<u64> = base.iter().map(|&w| w * rng.gen_range(8..=12)).collect();
    let d0 = ExplicitDistribution::from_counts(n, &base).expect("positive");
    let d1 = ExplicitDistribution::from_counts(n, &tilted).expect("positive");
    (d0, d1)
}

/// Pair whose first bit is tilted by `eps` in opposite directions on its two
/// values, other bits uniform: `D1` is uniform and `D0` puts `(1 -/+ eps)/2`
/// on `z0 = 1/0`. Every k-term ratio is 1 or `1 -/+ eps`.
pub fn tight_pair(n: usize, eps: &Rational) -> Result<(ExplicitDistribution, ExplicitDistribution)> {
    if eps.is_negative() || *eps >= Rational::one() {
        return Err(Error::Domain(format!("eps must lie in [0,1), got {eps}")));
    }
    let u = Rational::pow2_inv(n as u32);
    let d0 = ExplicitDistribution::new(
        n,
        (0..1usize << n).map(|i| {
            let x = point(i, n);
            let tilt = if x[0] { Rational::one() - eps } else { Rational::one() + eps };
            (x, &u * tilt)
        }),
    )?;
    Ok((d0, ExplicitDistribution::uniform(n)))
}

impl std::str::FromStr for ClassicalPostStrategy {
    type Err = Error;

    /// Reads the `Display` form: `leaf(p=P, o=O)` or `zI ? ONE : ZERO`.
    fn from_str(s: &str) -> Result<Self> {
        let mut rest = s.trim();
        let out = parse_strategy(&mut rest)?;
        if !rest.trim().is_empty() {
            return Err(Error::Parse(format!("trailing text {:?} in strategy", rest.trim())));
        }
        Ok(out)
    }
}

fn parse_strategy(s: &mut &str) -> Result<ClassicalPostStrategy> {
    let bad = |m: &str| Error::Parse(format!("strategy: {m}"));
    *s = s.trim_start();
    if let Some(r) = s.strip_prefix("leaf(") {
        let close = r.find(')').ok_or_else(|| bad("unclosed leaf"))?;
        let (body, tail) = r.split_at(close);
        *s = &tail[1..];
        let mut p = None;
        let mut o = None;
        for part in body.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(|| bad("leaf fields are p=.. and o=.."))?;
            let v: Rational = v.trim().parse()?;
            match k.trim() {
                "p" => p = Some(v),
                "o" => o = Some(v),
                other => return Err(bad(&format!("unknown leaf field {other}"))),
            }
        }
        return Ok(ClassicalPostStrategy::leaf(
            p.ok_or_else(|| bad("leaf needs p"))?,
            o.ok_or_else(|| bad("leaf needs o"))?,
        ));
    }
    let r = s.strip_prefix('z').ok_or_else(|| bad("expected `leaf(` or `z<index>`"))?;
    let digits = r.find(|c: char| !c.is_ascii_digit()).unwrap_or(r.len());
    let index: usize = r[..digits].parse().map_err(|_| bad("bad query index"))?;
    *s = r[digits..].trim_start();
    *s = s.strip_prefix('?').ok_or_else(|| bad("expected `?`"))?;
    let one = parse_strategy(s)?;
    *s = s.trim_start();
    *s = s.strip_prefix(':').ok_or_else(|| bad("expected `:`"))?;
    let zero = parse_strategy(s)?;
    Ok(ClassicalPostStrategy::query(index, zero, one))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn bits(s: &str) -> Vec<bool> {
        parse_bits(s).unwrap()
    }

    fn example() -> ExplicitDistribution {
        ExplicitDistribution::parse("00 1/6\n01 1/3\n10 1/3\n11 1/6\n").unwrap()
    }

    #[test]
    fn kterm_examples() {
        let u = ExplicitDistribution::uniform(2);
        assert_eq!(kterm_prob(&u, &KTerm::new(vec![(0, true)]).unwrap()), r("1/2"));
        let pm = ExplicitDistribution::point_mass(bits("11"));
        assert_eq!(kterm_prob(&pm, &KTerm::new(vec![(0, true), (1, false)]).unwrap()), Rational::zero());
        assert_eq!(kterm_prob(&example(), &KTerm::new(vec![(0, true)]).unwrap()), r("1/2"));
    }

    #[test]
    fn parse_rejects_bad_weights() {
        assert!(ExplicitDistribution::parse("0 1/2\n1 1/3\n").is_err());
        assert!(ExplicitDistribution::parse("0 1/2\n11 1/2\n").unwrap_err().is_usage());
        assert_eq!(example().to_string(), "00 1/6\n01 1/3\n10 1/3\n11 1/6\n");
    }

    #[test]
    fn epsilon_examples() {
        let d = example();
        for k in 0..=2 {
            assert_eq!(kwise_epsilon(&d, &d, k).unwrap(), Epsilon::Finite(Rational::zero()));
        }
        let u = ExplicitDistribution::uniform(3);
        let pm = ExplicitDistribution::point_mass(bits("000"));
        assert!(matches!(kwise_epsilon(&u, &pm, 1).unwrap(), Epsilon::Incomparable(_)));
        // Reverse direction: ratio 0 on z0, so eps = 1.
        assert_eq!(kwise_epsilon(&pm, &u, 1).unwrap(), Epsilon::Finite(Rational::one()));
    }

    /// Second path to eps: enumerate literal assignments by brute force over
    /// index subsets and polarities encoded as base-3 digits.
    fn eps_oracle(d0: &ExplicitDistribution, d1: &ExplicitDistribution, k: usize) -> Option<Rational> {
        let n = d0.vars();
        let mut best = Rational::zero();
        for code in 0..3usize.pow(n as u32) {
            let digits: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
            if digits.iter().filter(|&&d| d != 2).count() != k {
                continue;
            }
            let matches = |x: &[bool]| digits.iter().enumerate().all(|(i, &d)| d == 2 || x[i] == (d == 1));
            let p = |d: &ExplicitDistribution| -> Rational {
                (0..1usize << n).map(|i| point(i, n)).filter(|x| matches(x)).map(|x| d.prob(&x)).sum()
            };
            let (p0, p1) = (p(d0), p(d1));
            if p1.is_zero() {
                if !p0.is_zero() {
                    return None;
                }
                continue;
            }
            best = best.max((p0.checked_div(&p1).unwrap() - Rational::one()).abs());
        }
        Some(best)
    }

    #[test]
    fn epsilon_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (d0, d1) = random_close_pair(3, &mut rng);
            for k in 1..=3 {
                let Epsilon::Finite(e) = kwise_epsilon(&d0, &d1, k).unwrap() else { panic!() };
                assert_eq!(Some(e), eps_oracle(&d0, &d1, k));
            }
        }
    }

    #[test]
    fn acceptance_examples() {
        let ignore = ClassicalPostStrategy::leaf(Rational::one(), r("1/2"));
        assert_eq!(strategy_acceptance(&example(), &ignore).unwrap().ratio, r("1/2"));
        let depth1 = ClassicalPostStrategy::query(
            0,
            ClassicalPostStrategy::leaf(Rational::one(), Rational::zero()),
            ClassicalPostStrategy::leaf(Rational::one(), Rational::one()),
        );
        let u = ExplicitDistribution::uniform(2);
        assert_eq!(strategy_acceptance(&u, &depth1).unwrap().ratio, r("1/2"));
        let pm = ExplicitDistribution::point_mass(bits("11"));
        assert_eq!(strategy_acceptance(&pm, &depth1).unwrap().ratio, Rational::one());
        let dead = ClassicalPostStrategy::leaf(Rational::zero(), Rational::zero());
        assert!(strategy_acceptance(&u, &dead).is_err());
        let bad = ClassicalPostStrategy::leaf(r("1/2"), r("3/4"));
        assert!(strategy_acceptance(&u, &bad).is_err());
    }

    #[test]
    fn acceptance_by_paths_agrees() {
        let s = ClassicalPostStrategy::query(
            1,
            ClassicalPostStrategy::query(0, ClassicalPostStrategy::leaf(r("1/2"), r("1/4")), ClassicalPostStrategy::leaf(r("1"), r("0"))),
            ClassicalPostStrategy::leaf(r("3/4"), r("3/4")),
        );
        let d = ExplicitDistribution::parse("000 1/8\n001 1/4\n010 1/8\n101 1/4\n111 1/4\n").unwrap();
        let acc = strategy_acceptance(&d, &s).unwrap();
        let post: Rational = s.paths().iter().map(|(c, p, _)| kterm_prob(&d, c) * *p).sum();
        let out: Rational = s.paths().iter().map(|(c, _, o)| kterm_prob(&d, c) * *o).sum();
        assert_eq!((acc.post, acc.out), (post, out));
    }

    #[test]
    fn strategy_text_round_trip() {
        let s = ClassicalPostStrategy::query(
            2,
            ClassicalPostStrategy::leaf(r("1/2"), r("0")),
            ClassicalPostStrategy::query(0, ClassicalPostStrategy::leaf(r("1"), r("1")), ClassicalPostStrategy::leaf(r("3/4"), r("1/4"))),
        );
        let text = s.to_string();
        assert_eq!(text.parse::<ClassicalPostStrategy>().unwrap(), s);
        assert!("z0 ? leaf(p=1, o=1)".parse::<ClassicalPostStrategy>().is_err());
    }

    #[test]
    fn identical_pair_has_ratio_one() {
        let d = example();
        let s = ClassicalPostStrategy::query(
            0,
            ClassicalPostStrategy::leaf(r("1/2"), r("1/4")),
            ClassicalPostStrategy::leaf(Rational::one(), Rational::one()),
        );
        let check = check_ratio_bound(&d, &d, 1, &s).unwrap();
        assert!(check.holds);
        assert_eq!(check.ratio, Some(Rational::one()));
    }

    #[test]
    fn window_and_tight_pair() {
        let (lo, hi) = ratio_window(&r("1/10"));
        assert_eq!(lo, r("9/11"));
        assert_eq!(hi, Some(r("11/9")));
        assert_eq!(ratio_window(&Rational::one()).1, None);
        let (d0, d1) = tight_pair(3, &r("1/10")).unwrap();
        assert_eq!(kwise_epsilon(&d0, &d1, 2).unwrap(), Epsilon::Finite(r("1/10")));
        let rep = exhaustive_ratio_search(&d0, &d1).unwrap();
        assert_eq!(rep.violations, 0);
        let (_, best) = rep.best.unwrap();
        assert!(best <= r("11/9"));
        assert!(best * r("11/10") >= r("11/9"));
    }

    #[test]
    fn exhaustive_search_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (d0, d1) = random_close_pair(2, &mut rng);
        let rep = exhaustive_ratio_search(&d0, &d1).unwrap();
        assert_eq!(rep.violations, 0);
        let (s, ratio) = rep.best.unwrap();
        let check = check_ratio_bound(&d0, &d1, 2, &s).unwrap();
        assert!(check.holds);
        assert_eq!(check.ratio, Some(ratio));
    }

    proptest! {
        #[test]
        fn polarity_split(weights in proptest::collection::vec(0u64..5, 8), i in 0usize..3, j in 0usize..3, pol in any::<bool>()) {
            prop_assume!(weights.iter().sum::<u64>() > 0);
            let d = ExplicitDistribution::from_counts(3, &weights).unwrap();
            let base = if i == j { vec![] } else { vec![(j, pol)] };
            let mut with = base.clone();
            with.push((i, true));
            let mut without = base.clone();
            without.push((i, false));
            let whole = kterm_prob(&d, &KTerm::new(base).unwrap());
            let split = kterm_prob(&d, &KTerm::new(with).unwrap()) + kterm_prob(&d, &KTerm::new(without).unwrap());
            prop_assert_eq!(whole, split);
        }
    }
}
