//! Error norms, convergence rates and the closed-form Example 1 solution.

use nalgebra::SVector;
use rayon::prelude::*;

use crate::dirac::{Spinor, C64};
use crate::error::{Error, Result};
use crate::summation::Field;

const LEAF: usize = 1024;

/// Pairwise sum of `f` over `items`. The split points depend only on the
/// length, so the result is independent of the thread count.
pub fn deterministic_sum<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    fn go<T: Sync>(items: &[T], f: &(impl Fn(&T) -> f64 + Sync)) -> f64 {
        if items.len() <= LEAF {
            return items.iter().map(f).sum();
        }
        let (l, r) = items.split_at(items.len() / 2);
        let (a, b) = rayon::join(|| go(l, f), || go(r, f));
        a + b
    }
    go(items, &f)
}

/// Discrete norms of `a − b` on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub epsilon: f64,
    pub nodes: usize,
    /// `Σ|e| / N`
    pub l1: f64,
    /// `√(Σ|e|² / N)`
    pub l2: f64,
    pub linf: f64,
    /// `l∞ / max|b|`, absent when `b ≡ 0`.
    pub linf_rel: Option<f64>,
    /// `l∞ / max|a|`, absent when `a ≡ 0`.
    pub linf_rel_a: Option<f64>,
    /// Raw sums `Σ|e|` and `√Σ|e|²`.
    pub l1_sum: f64,
    pub l2_sum: f64,
}

/// Norms of `a − b` with the spinor magnitude taken as the Euclidean norm
/// in ℂ⁴. `b` is the reference.
pub fn error_norms<const D: usize>(a: &Field<D>, b: &Field<D>) -> Result<ErrorReport> {
    if a.grid != b.grid || a.values.len() != b.values.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {}",
            a.grid.describe(),
            b.grid.describe()
        )));
    }
    if a.values.is_empty() {
        return Err(Error::GridMismatch("empty grid".into()));
    }
    let e: Vec<f64> = a
        .values
        .par_iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm())
        .collect();
    let n = e.len() as f64;
    let s1 = deterministic_sum(&e, |v| *v);
    let s2 = deterministic_sum(&e, |v| v * v);
    let linf = e.iter().copied().fold(0.0, f64::max);
    let rel = |m: f64| (m > 0.0).then(|| linf / m);
    Ok(ErrorReport {
        epsilon: b.epsilon,
        nodes: e.len(),
        l1: s1 / n,
        l2: (s2 / n).sqrt(),
        linf,
        linf_rel: rel(b.max_norm()),
        linf_rel_a: rel(a.max_norm()),
        l1_sum: s1,
        l2_sum: s2.sqrt(),
    })
}

/// Least-squares fit `log e ≈ p log ε + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the fit residuals in log space.
    pub residual: f64,
}

pub fn convergence_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "rate fit needs at least two pairs, got {}",
            pairs.len()
        )));
    }
    if let Some(bad) = pairs.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "rate fit needs positive epsilon and error, got {bad:?}"
        )));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("rate fit needs distinct epsilon values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        pairs: pairs.to_vec(),
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// Example 1 exact solution `(e^{−|x|²/4d²} e^{−it/ε}, 0, 0, 0)`.
pub fn exact_example1<const D: usize>(t: f64, x: &SVector<f64, D>, epsilon: f64, d: f64) -> Spinor {
    let amp = (-x.norm_squared() / (4.0 * d * d)).exp();
    let zero = C64::new(0.0, 0.0);
    Spinor::new(C64::from_polar(amp, -t / epsilon), zero, zero, zero)
}
