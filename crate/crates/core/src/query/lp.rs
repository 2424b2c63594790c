//! Exact linear feasibility by phase-one simplex over rationals.
//!
//! Variables are free; each is split into a difference of two nonnegative
//! columns. Pivoting follows Bland's rule, so the search terminates.

use crate::numeric::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub rel: Relation,
    pub rhs: Rational,
}

#[derive(Clone, Debug, Default)]
pub struct LinearSystem {
    vars: usize,
    constraints: Vec<Constraint>,
}

impl LinearSystem {
    pub fn new(vars: usize) -> Self {
        LinearSystem {
            vars,
            constraints: Vec::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn push(&mut self, coeffs: Vec<Rational>, rel: Relation, rhs: Rational) {
        assert_eq!(coeffs.len(), self.vars);
        self.constraints.push(Constraint { coeffs, rel, rhs });
    }

    /// Checks a candidate point exactly.
    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        self.constraints.iter().all(|c| {
            let lhs: Rational = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            match c.rel {
                Relation::Le => lhs <= c.rhs,
                Relation::Ge => lhs >= c.rhs,
                Relation::Eq => lhs == c.rhs,
            }
        })
    }

    /// A feasible point, or `None` when the system is infeasible.
    pub fn solve(&self) -> Option<Vec<Rational>> {
        let n = self.vars;
        let m = self.constraints.len();
        if m == 0 {
            return Some(vec![Rational::zero(); n]);
        }
        let slacks = self
            .constraints
            .iter()
            .filter(|c| c.rel != Relation::Eq)
            .count();
        let arts = self
            .constraints
            .iter()
            .filter(|c| match c.rel {
                Relation::Eq => true,
                Relation::Ge => !c.rhs.is_negative(),
                Relation::Le => c.rhs.is_negative(),
            })
            .count();
        // Columns: u (n), v (n), slacks, artificials, then rhs.
        let art_start = 2 * n + slacks;
        let width = art_start + arts;
        let rhs = width;
        let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack_col = 2 * n;
        let mut art_col = art_start;
        let mut art_rows = Vec::new();
        for c in &self.constraints {
            let flip = c.rhs.is_negative();
            let sign = |r: &Rational| if flip { -r.clone() } else { r.clone() };
            let mut row = vec![Rational::zero(); width + 1];
            for (j, a) in c.coeffs.iter().enumerate() {
                row[j] = sign(a);
                row[n + j] = -sign(a);
            }
            let rel = match (c.rel, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            match rel {
                Relation::Le => {
                    row[slack_col] = Rational::one();
                    basis.push(slack_col);
                    slack_col += 1;
                }
                Relation::Ge | Relation::Eq => {
                    if rel == Relation::Ge {
                        row[slack_col] = -Rational::one();
                        slack_col += 1;
                    }
                    row[art_col] = Rational::one();
                    basis.push(art_col);
                    art_col += 1;
                    art_rows.push(rows.len());
                }
            }
            row[rhs] = sign(&c.rhs);
            rows.push(row);
        }

        // obj[j]: decrease in total artificial value per unit of column j.
        let mut obj = vec![Rational::zero(); width + 1];
        for &i in &art_rows {
            for j in 0..=width {
                if j < art_start || j == rhs {
                    obj[j] += &rows[i][j];
                }
            }
        }

        loop {
            let Some(pc) = (0..art_start).find(|&j| obj[j] > Rational::zero()) else {
                break;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in rows.iter().enumerate() {
                if row[pc] > Rational::zero() {
                    let ratio = row[rhs].checked_div(&row[pc]).expect("positive pivot");
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && basis[i] < basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            let Some((pr, _)) = best else {
                // Unbounded direction; the artificial sum cannot go below
                // zero, so this only happens when it is already zero.
                break;
            };
            pivot(&mut rows, &mut obj, pr, pc);
            basis[pr] = pc;
        }

        if !obj[rhs].is_zero() {
            return None;
        }
        let mut cols = vec![Rational::zero(); width];
        for (i, &b) in basis.iter().enumerate() {
            cols[b] = rows[i][rhs].clone();
        }
        let x: Vec<Rational> = (0..n).map(|j| &cols[j] - &cols[n + j]).collect();
        debug_assert!(self.satisfied_by(&x));
        Some(x)
    }
}

fn pivot(rows: &mut [Vec<Rational>], obj: &mut [Rational], pr: usize, pc: usize) {
    let inv = rows[pr][pc].recip().expect("nonzero pivot");
    for v in rows[pr].iter_mut() {
        if !v.is_zero() {
            *v *= &inv;
        }
    }
    let prow = rows[pr].clone();
    let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
    for (i, row) in rows.iter_mut().enumerate() {
        if i == pr || row[pc].is_zero() {
            continue;
        }
        let factor = row[pc].clone();
        for &j in &nz {
            row[j] -= &factor * &prow[j];
        }
    }
    if !obj[pc].is_zero() {
        let factor = obj[pc].clone();
        for &j in &nz {
            obj[j] -= &factor * &prow[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64) -> Rational {
        Rational::from(n)
    }

    #[test]
    fn small_systems() {
        // x + y <= 4, x >= 1, y >= 2
        let mut s = LinearSystem::new(2);
        s.push(vec![q(1), q(1)], Relation::Le, q(4));
        s.push(vec![q(1), q(0)], Relation::Ge, q(1));
        s.push(vec![q(0), q(1)], Relation::Ge, q(2));
        let x = s.solve().unwrap();
        assert!(s.satisfied_by(&x));
        s.push(vec![q(1), q(1)], Relation::Ge, q(5));
        assert!(s.solve().is_none());
    }

    #[test]
    fn negative_values_and_equalities() {
        let mut s = LinearSystem::new(2);
        s.push(vec![q(1), q(1)], Relation::Eq, q(-3));
        s.push(vec![q(1), q(-1)], Relation::Eq, q(1));
        assert_eq!(s.solve().unwrap(), vec![q(-1), q(-2)]);
        let mut s = LinearSystem::new(1);
        s.push(vec![Rational::frac(1, 3)], Relation::Le, Rational::frac(-1, 2));
        let x = s.solve().unwrap();
        assert!(x[0] <= q(-3) * Rational::frac(1, 2));
    }

    #[test]
    fn degenerate_is_fine() {
        let mut s = LinearSystem::new(3);
        for _ in 0..4 {
            s.push(vec![q(1), q(1), q(1)], Relation::Le, q(0));
            s.push(vec![q(1), q(-1), q(0)], Relation::Ge, q(0));
        }
        s.push(vec![q(0), q(0), q(1)], Relation::Eq, q(0));
        assert!(s.solve().is_some());
    }

    proptest! {
        /// Systems built around a known point stay feasible; any returned
        /// point satisfies every constraint.
        #[test]
        fn planted_solution(point in proptest::collection::vec(-4i64..=4, 3),
                            rows in proptest::collection::vec((proptest::collection::vec(-3i64..=3, 3), 0u8..3, 0i64..3), 1..8)) {
            let mut s = LinearSystem::new(3);
            for (a, rel, slack) in rows {
                let lhs: i64 = a.iter().zip(&point).map(|(x, y)| x * y).sum();
                let coeffs = a.iter().map(|&v| q(v)).collect();
                match rel {
                    0 => s.push(coeffs, Relation::Le, q(lhs + slack)),
                    1 => s.push(coeffs, Relation::Ge, q(lhs - slack)),
                    _ => s.push(coeffs, Relation::Eq, q(lhs)),
                }
            }
            let x = s.solve();
            prop_assert!(x.is_some());
            prop_assert!(s.satisfied_by(&x.unwrap()));
        }

        /// A one-variable interval system matches direct reasoning.
        #[test]
        fn interval(lo in -5i64..5, hi in -5i64..5) {
            let mut s = LinearSystem::new(1);
            s.push(vec![q(1)], Relation::Ge, q(lo));
            s.push(vec![q(1)], Relation::Le, q(hi));
            prop_assert_eq!(s.solve().is_some(), lo <= hi);
        }
    }
}
