//! Numerical check that the standard posterior under the Gamma prior on σ²
//! equals the b-fractional posterior under an Exp(1) prior on the noise
//! variance, for priors on f with finitely many atoms.

use crate::error::{Error, Result};
use crate::numerics::quad::quad_1d;
use crate::numerics::special::ln_gamma;
use crate::priors::SigmaPrior;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A prior atom: values of `f` at the design points and its prior weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub fvals: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceResult {
    pub standard: Vec<f64>,
    pub fractional: Vec<f64>,
    pub max_rel_discrepancy: f64,
}

/// `log ∫ exp(ℓ(u)) du` for a concave `ℓ` with decreasing derivative `dl`.
fn log_integral(l: impl Fn(f64) -> f64, dl: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while dl(lo) < 0.0 {
        lo *= 2.0;
        if lo < -1e4 {
            return Err(Error::DegenerateInput("improper noise-variance integral".into()));
        }
    }
    while dl(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::DegenerateInput("improper noise-variance integral".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dl(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mode = 0.5 * (lo + hi);
    let peak = l(mode);
    let reach = |dir: f64| {
        let mut step = 1.0;
        while l(mode + dir * step) - peak > -60.0 {
            step *= 1.5;
        }
        mode + dir * step
    };
    let (a, b) = (reach(-1.0), reach(1.0));
    let z = quad_1d(|u| (l(u) - peak).exp(), a, b, 1e-14)?;
    Ok(peak + z.ln())
}

fn normalise(logs: &[f64]) -> Vec<f64> {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Posterior atom probabilities (i) under the standard likelihood with the
/// Gamma(((1−b)/2)n + 1, b) prior on σ² and (ii) under the b-tempered
/// likelihood with an Exp(1) prior on the variance, and their largest
/// relative difference.
pub fn posterior_equivalence_check(atoms: &[Atom], y: &[f64], b: f64) -> Result<EquivalenceResult> {
    if atoms.is_empty() {
        return Err(Error::InvalidConfig("need at least one atom".into()));
    }
    let n = y.len();
    let prior = SigmaPrior::new(b, n)?;
    let (k, nf) = (prior.shape(), n as f64);
    let mut log_std = Vec::with_capacity(atoms.len());
    let mut log_frac = Vec::with_capacity(atoms.len());
    for atom in atoms {
        if atom.fvals.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: atom.fvals.len() });
        }
        if !(atom.weight > 0.0) {
            return Err(Error::DomainError("atom weights must be > 0".into()));
        }
        let s: f64 = atom.fvals.iter().zip(y).map(|(f, y)| (y - f) * (y - f)).sum();
        // integrate over u = log σ² (resp. log s²), Jacobian e^u included
        let l_std = |u: f64| {
            -0.5 * nf * ((2.0 * PI).ln() + u) - 0.5 * s * (-u).exp() + (k - 1.0) * u - b * u.exp() + k * b.ln() - ln_gamma(k) + u
        };
        let dl_std = |u: f64| -0.5 * nf + 0.5 * s * (-u).exp() + k - b * u.exp();
        let l_frac = |u: f64| b * (-0.5 * nf * ((2.0 * PI).ln() + u) - 0.5 * s * (-u).exp()) - u.exp() + u;
        let dl_frac = |u: f64| -0.5 * b * nf + 0.5 * b * s * (-u).exp() - u.exp() + 1.0;
        log_std.push(atom.weight.ln() + log_integral(l_std, dl_std)?);
        log_frac.push(atom.weight.ln() + log_integral(l_frac, dl_frac)?);
    }
    let standard = normalise(&log_std);
    let fractional = normalise(&log_frac);
    let max_rel_discrepancy = standard.iter().zip(&fractional).map(|(p, q)| (p - q).abs() / q.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    Ok(EquivalenceResult { standard, fractional, max_rel_discrepancy })
}
