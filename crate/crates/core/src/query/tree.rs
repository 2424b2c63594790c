//! Rational trees: binary trees of rational functions read as coin biases.
//!
//! Evaluating at `x` flips a coin with bias `clamp(R(x))` at each node,
//! descending to the one-child on 1 and the zero-child on 0; a leaf outputs
//! its coin. The degree of a tree is the largest sum of node degrees along a
//! root-to-leaf path.

use std::fmt::{self, Write as _};

use rand::Rng;

use super::poly::{format_bits, interpolate_multilinear, point, MultilinearPoly, RationalFunction, TruthTable};
use crate::error::{Error, Result};
use crate::numeric::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RationalTree {
    Leaf(RationalFunction),
    Node {
        f: RationalFunction,
        zero: Box<RationalTree>,
        one: Box<RationalTree>,
    },
}

impl RationalTree {
    pub fn leaf(f: RationalFunction) -> Self {
        RationalTree::Leaf(f)
    }

    pub fn node(f: RationalFunction, zero: RationalTree, one: RationalTree) -> Self {
        RationalTree::Node {
            f,
            zero: Box::new(zero),
            one: Box::new(one),
        }
    }

    pub fn function(&self) -> &RationalFunction {
        match self {
            RationalTree::Leaf(f) | RationalTree::Node { f, .. } => f,
        }
    }

    pub fn vars(&self) -> usize {
        self.function().vars()
    }

    pub fn degree(&self) -> usize {
        match self {
            RationalTree::Leaf(f) => f.degree(),
            RationalTree::Node { f, zero, one } => f.degree() + zero.degree().max(one.degree()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            RationalTree::Leaf(_) => 0,
            RationalTree::Node { zero, one, .. } => 1 + zero.depth().max(one.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            RationalTree::Leaf(_) => 1,
            RationalTree::Node { zero, one, .. } => 1 + zero.node_count() + one.node_count(),
        }
    }

    /// Acceptance probability at `x`.
    pub fn eval(&self, x: &[bool]) -> Rational {
        let r = self.function().eval(x).clamp_unit();
        match self {
            RationalTree::Leaf(_) => r,
            RationalTree::Node { zero, one, .. } => {
                let mut acc = Rational::zero();
                if !r.is_zero() {
                    acc += &r * one.eval(x);
                }
                if !r.is_one() {
                    acc += r.complement() * zero.eval(x);
                }
                acc
            }
        }
    }

    /// One product per root-to-leaf path.
    pub fn flatten(&self) -> FlatTree {
        let mut paths = Vec::new();
        fn go(t: &RationalTree, prefix: &mut Vec<Factor>, out: &mut Vec<Vec<Factor>>) {
            match t {
                RationalTree::Leaf(f) => {
                    prefix.push(Factor {
                        f: f.clone(),
                        complemented: false,
                    });
                    out.push(prefix.clone());
                    prefix.pop();
                }
                RationalTree::Node { f, zero, one } => {
                    for (complemented, child) in [(true, zero), (false, one)] {
                        prefix.push(Factor {
                            f: f.clone(),
                            complemented,
                        });
                        go(child, prefix, out);
                        prefix.pop();
                    }
                }
            }
        }
        go(self, &mut Vec::new(), &mut paths);
        FlatTree {
            n: self.vars(),
            paths,
        }
    }

    /// Reads the indented text format produced by `Display`.
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        let lines: Vec<(usize, usize, &str)> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(k, l)| (k + 1, l.len() - l.trim_start().len(), l.trim()))
            .collect();
        let mut pos = 0;
        let tree = parse_subtree(n, &lines, &mut pos, None)?;
        if pos != lines.len() {
            return Err(Error::Syntax {
                line: lines[pos].0,
                message: "unexpected line after the tree".into(),
            });
        }
        Ok(tree)
    }
}

fn parse_function(n: usize, line: usize, body: &str) -> Result<RationalFunction> {
    let syntax = |m: &str| Error::Syntax {
        line,
        message: m.to_string(),
    };
    let body = body.trim();
    let rest = body.strip_prefix("P:").ok_or_else(|| syntax("expected `P: ... | Q: ...`"))?;
    let (p, q) = rest.split_once("| Q:").ok_or_else(|| syntax("missing `| Q:`"))?;
    let p = MultilinearPoly::parse(n, p).map_err(|e| syntax(&e.to_string()))?;
    let q = MultilinearPoly::parse(n, q).map_err(|e| syntax(&e.to_string()))?;
    RationalFunction::new(p, q).map_err(|e| syntax(&e.to_string()))
}

fn parse_subtree(
    n: usize,
    lines: &[(usize, usize, &str)],
    pos: &mut usize,
    expect_branch: Option<char>,
) -> Result<RationalTree> {
    let &(no, indent, mut text) = lines.get(*pos).ok_or(Error::Syntax {
        line: lines.last().map(|l| l.0).unwrap_or(0),
        message: "unexpected end of tree".into(),
    })?;
    if let Some(b) = expect_branch {
        text = text
            .strip_prefix(b)
            .and_then(|t| t.strip_prefix(':'))
            .ok_or_else(|| Error::Syntax {
                line: no,
                message: format!("expected `{b}:` child"),
            })?
            .trim_start();
    }
    *pos += 1;
    if let Some(body) = text.strip_prefix("leaf") {
        return Ok(RationalTree::Leaf(parse_function(n, no, body)?));
    }
    let body = text.strip_prefix("node").ok_or_else(|| Error::Syntax {
        line: no,
        message: "expected `node` or `leaf`".into(),
    })?;
    let f = parse_function(n, no, body)?;
    for &(cno, cindent, _) in &lines[*pos..(*pos + 1).min(lines.len())] {
        if cindent <= indent {
            return Err(Error::Syntax {
                line: cno,
                message: "children must be indented below their node".into(),
            });
        }
    }
    let zero = parse_subtree(n, lines, pos, Some('0'))?;
    let one = parse_subtree(n, lines, pos, Some('1'))?;
    Ok(RationalTree::node(f, zero, one))
}

impl fmt::Display for RationalTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &RationalTree, depth: usize, label: &str, out: &mut String) {
            let pad = "  ".repeat(depth);
            match t {
                RationalTree::Leaf(func) => {
                    let _ = writeln!(out, "{pad}{label}leaf {func}");
                }
                RationalTree::Node { f, zero, one } => {
                    let _ = writeln!(out, "{pad}{label}node {f}");
                    go(zero, depth + 1, "0: ", out);
                    go(one, depth + 1, "1: ", out);
                }
            }
        }
        let mut s = String::new();
        go(self, 0, "", &mut s);
        f.write_str(&s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub f: RationalFunction,
    /// `1 - clamp(f)` instead of `clamp(f)`.
    pub complemented: bool,
}

/// A rational tree rewritten as a sum over paths of products of node
/// factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatTree {
    pub n: usize,
    pub paths: Vec<Vec<Factor>>,
}

impl FlatTree {
    pub fn eval(&self, x: &[bool]) -> Rational {
        self.paths
            .iter()
            .map(|path| {
                path.iter()
                    .map(|fac| {
                        let r = fac.f.eval(x).clamp_unit();
                        if fac.complemented {
                            r.complement()
                        } else {
                            r
                        }
                    })
                    .product::<Rational>()
            })
            .sum()
    }
}

impl fmt::Display for FlatTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, path) in self.paths.iter().enumerate() {
            let factors: Vec<String> = path
                .iter()
                .map(|fac| {
                    if fac.complemented {
                        format!("(1 - [{}])", fac.f)
                    } else {
                        format!("[{}]", fac.f)
                    }
                })
                .collect();
            writeln!(f, "path {k}: {}", factors.join(" * "))?;
        }
        Ok(())
    }
}

/// Result of an approximation check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxReport {
    pub holds: bool,
    /// Input with the largest error seen.
    pub worst_input: Vec<bool>,
    pub worst_error: Rational,
    pub inputs_checked: usize,
}

impl fmt::Display for ApproxReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "holds\t{}", self.holds)?;
        writeln!(f, "worst_input\t{}", format_bits(&self.worst_input))?;
        writeln!(f, "worst_error\t{}", self.worst_error)?;
        writeln!(f, "inputs_checked\t{}", self.inputs_checked)
    }
}

/// Checks `|value(x) - target(x)| <= eps` over `inputs`.
pub fn check_approx_on(
    inputs: impl IntoIterator<Item = Vec<bool>>,
    value: impl Fn(&[bool]) -> Rational,
    target: impl Fn(&[bool]) -> bool,
    eps: &Rational,
) -> ApproxReport {
    let mut worst: Option<(Vec<bool>, Rational)> = None;
    let mut count = 0;
    for x in inputs {
        count += 1;
        let err = (value(&x) - Rational::from(i64::from(target(&x)))).abs();
        if worst.as_ref().map_or(true, |(_, w)| err > *w) {
            worst = Some((x, err));
        }
    }
    let (worst_input, worst_error) = worst.unwrap_or((Vec::new(), Rational::zero()));
    ApproxReport {
        holds: worst_error <= *eps,
        worst_input,
        worst_error,
        inputs_checked: count,
    }
}

pub fn all_points(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1usize << n).map(move |i| point(i, n))
}

pub fn random_points<R: Rng>(n: usize, count: usize, rng: &mut R) -> Vec<Vec<bool>> {
    (0..count).map(|_| (0..n).map(|_| rng.gen()).collect()).collect()
}

/// Exhaustive check of a tree against a truth table. Limited to 20
/// variables.
pub fn check_approx(tree: &RationalTree, f: &TruthTable, eps: &Rational) -> Result<ApproxReport> {
    check_size(f.vars())?;
    if tree.vars() != f.vars() {
        return Err(Error::InputLength {
            expected: f.vars(),
            got: tree.vars(),
        });
    }
    Ok(check_approx_on(all_points(f.vars()), |x| tree.eval(x), |x| f.eval(x), eps))
}

/// Exhaustive check of a single rational function (clamped, as a leaf).
pub fn check_approx_function(r: &RationalFunction, f: &TruthTable, eps: &Rational) -> Result<ApproxReport> {
    check_approx(&RationalTree::leaf(r.clone()), f, eps)
}

fn check_size(n: usize) -> Result<()> {
    if n > 20 {
        return Err(Error::Limit(format!("{n} variables is too many for exhaustive checking")));
    }
    Ok(())
}

/// `1 / (1 + M (n - sum x_i))` with `M = ceil(1/eps)`: equal to 1 on the
/// all-ones input and at most `1/(1+M) < eps` elsewhere.
pub fn build_and_rational(n: usize, eps: &Rational) -> Result<RationalFunction> {
    if eps.is_negative() || eps.is_zero() || *eps >= Rational::one() {
        return Err(Error::Domain(format!("eps must lie in (0,1), got {eps}")));
    }
    let m = Rational::from_integer(eps.recip()?.ceil_to_integer());
    let mut q = MultilinearPoly::constant(n, Rational::one() + &m * Rational::from(n as i64));
    for i in 0..n {
        q.add_term(1 << i, -m.clone());
    }
    let r = RationalFunction::new(MultilinearPoly::constant(n, Rational::one()), q)?;
    if n <= 20 {
        let report = check_approx_function(&r, &TruthTable::and(n), eps)?;
        if !report.holds {
            return Err(Error::Invariant(format!(
                "AND approximator misses by {} at {}",
                report.worst_error,
                format_bits(&report.worst_input)
            )));
        }
    }
    Ok(r)
}

/// Input length of `Ada(f, d)` for `f` on `n` bits: `n (2^(d+1) - 1)`.
pub fn ada_len(n: usize, d: usize) -> usize {
    n * ((1 << (d + 1)) - 1)
}

/// `Ada(f, 0) = f`; `Ada(f, d)(x, y, z)` is `Ada(f, d-1)` applied to `y`
/// when `f(x) = 0` and to `z` otherwise, with `x` the first `n` bits and
/// `y`, `z` the two halves of the rest.
pub fn ada_eval(f: &TruthTable, d: usize, input: &[bool]) -> Result<bool> {
    let n = f.vars();
    if input.len() != ada_len(n, d) {
        return Err(Error::InputLength {
            expected: ada_len(n, d),
            got: input.len(),
        });
    }
    let (x, rest) = input.split_at(n);
    let fx = f.eval(x);
    if d == 0 {
        return Ok(fx);
    }
    let (y, z) = rest.split_at(rest.len() / 2);
    ada_eval(f, d - 1, if fx { z } else { y })
}

/// Tree for `Ada(f, d)` from an approximator `node` of `f`: each node reads
/// its own `x` block and the children cover the `y` and `z` blocks.
pub fn build_ada_tree(node: &RationalFunction, d: usize) -> RationalTree {
    let n = node.vars();
    let total = ada_len(n, d);
    fn go(node: &RationalFunction, n: usize, total: usize, d: usize, offset: usize) -> RationalTree {
        let here = node.embed(total, offset);
        if d == 0 {
            return RationalTree::leaf(here);
        }
        let sub = ada_len(n, d - 1);
        RationalTree::node(
            here,
            go(node, n, total, d - 1, offset + n),
            go(node, n, total, d - 1, offset + n + sub),
        )
    }
    go(node, n, total, d, 0)
}

/// Table of `clamp(r(x))`, interpolated back to a polynomial when clamping
/// changes some value.
fn clamped(r: &RationalFunction) -> RationalFunction {
    let n = r.vars();
    let mut changed = false;
    let table: Vec<Rational> = all_points(n)
        .map(|x| {
            let v = r.eval(&x);
            let c = v.clamp_unit();
            changed |= c != v;
            c
        })
        .collect();
    if changed {
        RationalFunction::polynomial(interpolate_multilinear(&table).expect("full cube"))
    } else {
        r.clone()
    }
}

/// A single rational function equal to a zero-error tree.
///
/// Every internal node reached with nonzero probability must take the value
/// 0 or 1 (after clamping) on every input; a violation is reported with the
/// node's path and the input. The result composes `r F1 + (1 - r) F0` up
/// the tree.
pub fn exact_tree_to_function(tree: &RationalTree, f: &TruthTable) -> Result<RationalFunction> {
    check_size(f.vars())?;
    let report = check_approx(tree, f, &Rational::zero())?;
    if !report.holds {
        return Err(Error::Domain(format!(
            "tree does not compute f exactly: error {} at {}",
            report.worst_error,
            format_bits(&report.worst_input)
        )));
    }
    for x in all_points(f.vars()) {
        let mut t = tree;
        let mut path = String::new();
        while let RationalTree::Node { f: node, zero, one } = t {
            let r = node.eval(&x).clamp_unit();
            if !r.is_zero() && !r.is_one() {
                let at = if path.is_empty() { "root".to_string() } else { path };
                return Err(Error::Domain(format!(
                    "internal node {at} takes value {r} at x={}",
                    format_bits(&x)
                )));
            }
            path.push(if r.is_one() { '1' } else { '0' });
            t = if r.is_one() { one } else { zero };
        }
    }
    fn compose(t: &RationalTree) -> RationalFunction {
        match t {
            RationalTree::Leaf(f) => clamped(f),
            RationalTree::Node { f, zero, one } => {
                let r = clamped(f);
                r.mul(&compose(one)).add(&r.complement().mul(&compose(zero)))
            }
        }
    }
    let out = compose(tree);
    for x in all_points(f.vars()) {
        if out.eval(&x) != Rational::from(i64::from(f.eval(&x))) {
            return Err(Error::Invariant(format!(
                "composed function differs from f at {}",
                format_bits(&x)
            )));
        }
    }
    Ok(out)
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

    fn var(n: usize, i: usize) -> RationalFunction {
        RationalFunction::polynomial(MultilinearPoly::var(n, i))
    }

    fn konst(n: usize, c: &str) -> RationalFunction {
        RationalFunction::constant(n, r(c))
    }

    fn and_tree() -> RationalTree {
        RationalTree::node(var(2, 0), RationalTree::leaf(konst(2, "0")), RationalTree::leaf(var(2, 1)))
    }

    #[test]
    fn simple_trees() {
        let one = RationalTree::leaf(konst(2, "1"));
        let half = RationalTree::node(
            konst(2, "1/2"),
            RationalTree::leaf(konst(2, "0")),
            RationalTree::leaf(konst(2, "1")),
        );
        for x in all_points(2) {
            assert_eq!(one.eval(&x), Rational::one());
            assert_eq!(half.eval(&x), r("1/2"));
        }
        let t = and_tree();
        for x in all_points(2) {
            assert_eq!(t.eval(&x), Rational::from(i64::from(x[0] && x[1])));
        }
        assert_eq!(t.degree(), 2);
    }

    #[test]
    fn approximation_checks() {
        assert!(check_approx(&and_tree(), &TruthTable::and(2), &Rational::zero()).unwrap().holds);
        let half = RationalTree::leaf(konst(2, "1/2"));
        let rep = check_approx(&half, &TruthTable::and(2), &r("1/3")).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.worst_error, r("1/2"));
        let gadget = build_and_rational(5, &r("1/10")).unwrap();
        let rep = check_approx_function(&gadget, &TruthTable::and(5), &r("1/10")).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.worst_error, r("1/11"));
    }

    #[test]
    fn and_gadget_values() {
        let g = build_and_rational(2, &r("1/10")).unwrap();
        assert_eq!(g.eval(&[true, true]), Rational::one());
        assert_eq!(g.eval(&[false, true]), r("1/11"));
        assert_eq!(g.eval(&[false, false]), r("1/21"));
        assert_eq!(g.degree(), 1);
        let g = build_and_rational(1, &r("1/4")).unwrap();
        assert_eq!(g.eval(&[false]), r("1/5"));
        for n in 1..8 {
            let g = build_and_rational(n, &r("1/3")).unwrap();
            assert_eq!(g.eval(&vec![true; n]), Rational::one());
        }
    }

    /// Second Ada implementation: walk the blocks with explicit offsets.
    fn ada_oracle(f: &TruthTable, d: usize, input: &[bool]) -> bool {
        let n = f.vars();
        let mut offset = 0;
        let mut level = d;
        loop {
            let x = &input[offset..offset + n];
            let fx = f.eval(x);
            if level == 0 {
                return fx;
            }
            let sub = n * ((1 << level) - 1);
            offset += n + if fx { sub } else { 0 };
            level -= 1;
        }
    }

    #[test]
    fn ada_matches_oracle() {
        let f = TruthTable::and(2);
        assert_eq!(ada_len(2, 1), 6);
        assert_eq!(ada_len(2, 2), 14);
        let x = [true, true, false, false, true, true];
        assert!(ada_eval(&f, 1, &x).unwrap());
        for d in 0..3 {
            for input in all_points(ada_len(2, d)) {
                assert_eq!(ada_eval(&f, d, &input).unwrap(), ada_oracle(&f, d, &input));
            }
        }
        assert!(ada_eval(&f, 1, &[true; 5]).unwrap_err().is_usage());
    }

    #[test]
    fn ada_tree_depth_one() {
        let node = build_and_rational(2, &r("1/12")).unwrap();
        let tree = build_ada_tree(&node, 1);
        assert_eq!(tree.degree(), 2);
        let target = TruthTable::from_fn(6, |x| ada_eval(&TruthTable::and(2), 1, x).unwrap());
        let rep = check_approx(&tree, &target, &r("1/6")).unwrap();
        assert!(rep.holds, "{rep}");
        let leaf = build_ada_tree(&node, 0);
        assert_eq!(leaf, RationalTree::leaf(node));
    }

    #[test]
    fn ada_tree_depth_two_sampled() {
        let node = build_and_rational(2, &r("1/12")).unwrap();
        let tree = build_ada_tree(&node, 2);
        assert_eq!(tree.degree(), 3);
        let f = TruthTable::and(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(14, 2000, &mut rng);
        let rep = check_approx_on(pts, |x| tree.eval(x), |x| ada_eval(&f, 2, x).unwrap(), &r("1/4"));
        assert!(rep.holds, "{rep}");
    }

    #[test]
    fn exact_tree_conversion() {
        let t = and_tree();
        let f = TruthTable::and(2);
        let g = exact_tree_to_function(&t, &f).unwrap();
        for x in all_points(2) {
            assert_eq!(g.eval(&x), Rational::from(i64::from(f.eval(&x))));
        }
        let leaf = RationalTree::leaf(var(2, 0));
        let g = exact_tree_to_function(&leaf, &TruthTable::from_fn(2, |x| x[0])).unwrap();
        assert_eq!(&g, leaf.function());
        let bad = RationalTree::node(
            konst(2, "1/2"),
            RationalTree::leaf(konst(2, "1")),
            RationalTree::leaf(konst(2, "1")),
        );
        let err = exact_tree_to_function(&bad, &TruthTable::constant(2, true)).unwrap_err();
        assert!(err.to_string().contains("root"), "{err}");
    }

    #[test]
    fn exact_conversion_clamps_out_of_range_nodes() {
        // Root value 2x0 clamps to x0.
        let two_x = RationalFunction::polynomial(MultilinearPoly::var(2, 0).scale(&r("2")));
        let t = RationalTree::node(two_x, RationalTree::leaf(konst(2, "0")), RationalTree::leaf(var(2, 1)));
        let g = exact_tree_to_function(&t, &TruthTable::and(2)).unwrap();
        assert_eq!(g.eval(&[true, true]), Rational::one());
    }

    #[test]
    fn text_round_trip() {
        let node = build_and_rational(2, &r("1/12")).unwrap();
        let tree = build_ada_tree(&node, 1);
        let text = tree.to_string();
        assert!(text.starts_with("node P: 1/1*{} | Q: "));
        assert_eq!(RationalTree::parse(6, &text).unwrap(), tree);
        assert!(RationalTree::parse(6, "node P: 1/1*{} | Q: 1/1*{}\n").is_err());
    }

    fn arb_tree(n: usize, depth: u32) -> impl Strategy<Value = RationalTree> {
        let func = proptest::collection::vec((-3i64..=3, 1i64..=3), 1 << n).prop_map(move |cs| {
            RationalFunction::polynomial(MultilinearPoly::from_terms(
                n,
                cs.iter().enumerate().map(|(m, &(a, b))| (m as u64, Rational::frac(a, b))),
            ))
        });
        let leaf = func.clone().prop_map(RationalTree::leaf);
        leaf.prop_recursive(depth, 16, 2, move |inner| {
            (func.clone(), inner.clone(), inner)
                .prop_map(|(f, z, o)| RationalTree::node(f, z, o))
        })
    }

    proptest! {
        #[test]
        fn flatten_agrees_with_eval(t in arb_tree(3, 3)) {
            let flat = t.flatten();
            for x in all_points(3) {
                prop_assert_eq!(flat.eval(&x), t.eval(&x));
            }
        }
    }
}
