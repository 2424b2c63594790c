//! Exact rational degree of small Boolean functions.
//!
//! `|P/Q - f| <= eps` is linear once the sign of `Q` on each point is fixed,
//! and `P/Q` is scale invariant, so each sign pattern `s` gives the system
//! `s(x) Q(x) >= 1`, `|P(x) - f(x) Q(x)| <= eps s(x) Q(x)`. Patterns and
//! their negations give the same system up to `(P, Q) -> (-P, -Q)`, so the
//! first point is fixed positive.

use super::lp::{LinearSystem, Relation};
use super::poly::{point, MultilinearPoly, RationalFunction, TruthTable};
use super::tree::check_approx_function;
use crate::error::{Error, Result};
use crate::numeric::Rational;

/// Largest variable count accepted by the solver.
pub const MAX_VARS: usize = 4;

/// Monomials of degree at most `d` over `n` variables, in increasing order.
pub fn monomials(n: usize, d: usize) -> Vec<u64> {
    (0..1u64 << n).filter(|m| m.count_ones() as usize <= d).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RdegWitness {
    pub function: RationalFunction,
    /// Sign of `Q` on each point, `true` for positive.
    pub signs: Vec<bool>,
}

fn system(f: &TruthTable, eps: &Rational, monos: &[u64], signs: u64) -> LinearSystem {
    let n = f.vars();
    let k = monos.len();
    let mut s = LinearSystem::new(2 * k);
    for idx in 0..1usize << n {
        let x = point(idx, n);
        let basis: Vec<Rational> = monos
            .iter()
            .map(|&m| {
                let on = (0..n).all(|i| m >> i & 1 == 0 || x[i]);
                Rational::from(i64::from(on))
            })
            .collect();
        let sigma = if signs >> idx & 1 == 1 { Rational::one() } else { -Rational::one() };
        let fx = Rational::from(i64::from(f.eval(&x)));
        // Q part scaled by c, P part as is.
        let row = |p: bool, c: &Rational| -> Vec<Rational> {
            let mut r = vec![Rational::zero(); 2 * k];
            for (j, b) in basis.iter().enumerate() {
                if p {
                    r[j] = b.clone();
                }
                r[k + j] = b * c;
            }
            r
        };
        s.push(row(false, &sigma), Relation::Ge, Rational::one());
        if eps.is_zero() {
            s.push(row(true, &-fx.clone()), Relation::Eq, Rational::zero());
        } else {
            let es = eps * &sigma;
            // P - f Q - eps s Q <= 0 and P - f Q + eps s Q >= 0.
            s.push(row(true, &(-&fx - &es)), Relation::Le, Rational::zero());
            s.push(row(true, &(&es - &fx)), Relation::Ge, Rational::zero());
        }
    }
    s
}

fn solve_pattern(f: &TruthTable, eps: &Rational, monos: &[u64], signs: u64) -> Option<RdegWitness> {
    let n = f.vars();
    let k = monos.len();
    let x = system(f, eps, monos, signs).solve()?;
    let p = MultilinearPoly::from_terms(n, monos.iter().copied().zip(x[..k].iter().cloned()));
    let q = MultilinearPoly::from_terms(n, monos.iter().copied().zip(x[k..].iter().cloned()));
    let function = RationalFunction::new(p, q).ok()?;
    Some(RdegWitness {
        function,
        signs: (0..1usize << n).map(|i| signs >> i & 1 == 1).collect(),
    })
}

/// Searches for `P/Q` of degree at most `d` with `|P/Q - f| <= eps` on
/// the whole cube. Patterns are tried in increasing order and the first
/// witness is returned.
pub fn rdeg_feasible(f: &TruthTable, eps: &Rational, d: usize) -> Result<Option<RdegWitness>> {
    let n = f.vars();
    if n > MAX_VARS {
        return Err(Error::Limit(format!(
            "rational degree search supports at most {MAX_VARS} variables, got {n}"
        )));
    }
    if eps.is_negative() {
        return Err(Error::Domain(format!("eps must be nonnegative, got {eps}")));
    }
    let monos = monomials(n, d);
    let points = 1u64 << n;
    // Bit 0 always set: the first point has positive Q.
    let patterns = (0..1u64 << (points - 1)).map(|p| p << 1 | 1);
    #[cfg(feature = "parallel")]
    let found = {
        use rayon::prelude::*;
        patterns
            .collect::<Vec<_>>()
            .into_par_iter()
            .find_map_first(|s| solve_pattern(f, eps, &monos, s))
    };
    #[cfg(not(feature = "parallel"))]
    let found = patterns.into_iter().find_map(|s| solve_pattern(f, eps, &monos, s));
    if let Some(w) = &found {
        let report = check_approx_function(&w.function, f, eps)?;
        if !report.holds {
            return Err(Error::Invariant(format!(
                "solver witness misses by {} at {:?}",
                report.worst_error, report.worst_input
            )));
        }
    }
    Ok(found)
}

/// Smallest `d` for which [`rdeg_feasible`] succeeds, with its witness.
/// Never exceeds `deg(f)`: the multilinear extension over `Q = 1` is exact.
pub fn rdeg(f: &TruthTable, eps: &Rational) -> Result<(usize, RationalFunction)> {
    let top = f.degree();
    for d in 0..top {
        if let Some(w) = rdeg_feasible(f, eps, d)? {
            return Ok((d, w.function));
        }
    }
    if f.vars() > MAX_VARS {
        return Err(Error::Limit(format!(
            "rational degree search supports at most {MAX_VARS} variables, got {}",
            f.vars()
        )));
    }
    let p = super::poly::interpolate_multilinear(&f.as_rationals())?;
    Ok((top, RationalFunction::polynomial(p)))
}
