//! Forrelation at desk scale.
//!
//! `F` draws a Gaussian vector `g` over `N = 2^m` coordinates and returns
//! `x = sign(g)`, `y = sign(H g)` with `H` the Walsh-Hadamard transform. `U`
//! returns independent uniform signs. The value
//! `Phi(x, y) = 2^(-3m/2) sum_{i,j} x_i (-1)^(i.j) y_j` is an integer over
//! `sqrt(2)^(3m)`, kept exact as a [`SqrtDyadic`].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numeric::SqrtDyadic;

pub const MAX_M: u32 = 12;

/// In-place unnormalized Walsh-Hadamard transform.
pub fn walsh_hadamard<T>(v: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let n = v.len();
    assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

fn sign(v: f64) -> i64 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// `sum_{i,j} x_i (-1)^(i.j) y_j` by the double sum.
pub fn forrelation_sum_direct(x: &[i64], y: &[i64]) -> i64 {
    let mut s = 0;
    for (i, &xi) in x.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            let parity = (i & j).count_ones() & 1;
            let h = if parity == 0 { 1 } else { -1 };
            s += xi * h * yj;
        }
    }
    s
}

/// The same sum as `<x, H y>`.
pub fn forrelation_sum_fast(x: &[i64], y: &[i64]) -> i64 {
    let mut hy = y.to_vec();
    walsh_hadamard(&mut hy);
    x.iter().zip(&hy).map(|(a, b)| a * b).sum()
}

/// Exact `Phi`, checked against both evaluation orders.
pub fn forrelation_value(x: &[i64], y: &[i64]) -> Result<SqrtDyadic> {
    let n = x.len();
    if !n.is_power_of_two() || y.len() != n {
        return Err(Error::Domain("x and y must share a power-of-two length".into()));
    }
    let m = n.trailing_zeros();
    let fast = forrelation_sum_fast(x, y);
    if n <= 1 << 8 {
        let direct = forrelation_sum_direct(x, y);
        if direct != fast {
            return Err(Error::Invariant(format!("forrelation sums disagree: {direct} vs {fast}")));
        }
    }
    Ok(SqrtDyadic::new(fast, 3 * m))
}

/// One sample from `F`.
pub fn sample_forrelated<R: Rng>(m: u32, rng: &mut R) -> (Vec<i64>, Vec<i64>) {
    let n = 1usize << m;
    let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut hg = g.clone();
    walsh_hadamard(&mut hg);
    (g.iter().map(|&v| sign(v)).collect(), hg.iter().map(|&v| sign(v)).collect())
}

/// One sample from `U`.
pub fn sample_uniform<R: Rng>(m: u32, rng: &mut R) -> (Vec<i64>, Vec<i64>) {
    let n = 1usize << m;
    let mut draw = || (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    (draw(), draw())
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    /// Fraction of samples with `Phi >= threshold`.
    pub accept: f64,
}

fn summarize(values: &mut [f64], threshold: f64) -> Summary {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let q = |p: f64| values[((values.len() - 1) as f64 * p).round() as usize];
    Summary {
        mean,
        std: var.sqrt(),
        min: values[0],
        q25: q(0.25),
        median: q(0.5),
        q75: q(0.75),
        max: values[values.len() - 1],
        accept: values.iter().filter(|&&v| v >= threshold).count() as f64 / n,
    }
}

#[derive(Clone, Debug)]
pub struct ForrelationReport {
    pub m: u32,
    pub seed: u64,
    pub trials: usize,
    pub threshold: f64,
    pub forrelated: Summary,
    pub uniform: Summary,
    /// `Pr_F[accept] - Pr_U[accept]`.
    pub advantage: f64,
    /// Half-width of a 95% normal-approximation interval for the advantage.
    pub advantage_ci: f64,
}

impl fmt::Display for ForrelationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "m          {}", self.m)?;
        writeln!(f, "N          {}", 1u64 << self.m)?;
        writeln!(f, "seed       {}", self.seed)?;
        writeln!(f, "trials     {}", self.trials)?;
        writeln!(f, "threshold  {:.4}", self.threshold)?;
        writeln!(f)?;
        writeln!(
            f,
            "{:<6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "dist", "mean", "std", "min", "q25", "median", "q75", "max", "accept"
        )?;
        for (name, s) in [("F", &self.forrelated), ("U", &self.uniform)] {
            writeln!(
                f,
                "{:<6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                name, s.mean, s.std, s.min, s.q25, s.median, s.q75, s.max, s.accept
            )?;
        }
        writeln!(f)?;
        writeln!(f, "advantage  {:.4} +/- {:.4}", self.advantage, self.advantage_ci)
    }
}

/// Default threshold: half of `2/pi`, the typical value of `Phi` under `F`.
pub fn default_threshold() -> f64 {
    1.0 / std::f64::consts::PI
}

/// Samples `trials` pairs from each of `F` and `U` and reports the
/// threshold test `Phi >= threshold`. Trial `t` of distribution `d` uses
/// ChaCha8 stream `2t + d` of `seed`, so results do not depend on
/// scheduling.
pub fn forrelation_demo(m: u32, seed: u64, trials: usize, threshold: f64) -> Result<ForrelationReport> {
    if m == 0 || m > MAX_M {
        return Err(Error::Domain(format!("m must lie in 1..={MAX_M}, got {m}")));
    }
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let one = |t: usize, forrelated: bool| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * t as u64 + u64::from(!forrelated));
        let (x, y) = if forrelated {
            sample_forrelated(m, &mut rng)
        } else {
            sample_uniform(m, &mut rng)
        };
        Ok(forrelation_value(&x, &y)?.to_f64())
    };
    let run = |forrelated: bool| -> Result<Vec<f64>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..trials).into_par_iter().map(|t| one(t, forrelated)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..trials).map(|t| one(t, forrelated)).collect()
        }
    };
    let mut fv = run(true)?;
    let mut uv = run(false)?;
    let forrelated = summarize(&mut fv, threshold);
    let uniform = summarize(&mut uv, threshold);
    let advantage = forrelated.accept - uniform.accept;
    let n = trials as f64;
    let var = forrelated.accept * (1.0 - forrelated.accept) / n + uniform.accept * (1.0 - uniform.accept) / n;
    Ok(ForrelationReport {
        m,
        seed,
        trials,
        threshold,
        forrelated,
        uniform,
        advantage,
        advantage_ci: 1.96 * var.sqrt(),
    })
}
