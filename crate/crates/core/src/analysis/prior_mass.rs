//! Prior mass of sup-norm balls, the prior-mass condition on lengthscale
//! priors and the optimal bandwidth.

use super::{xi_const, Proportion};
use crate::error::{Error, Result};
use crate::kernels::DesignPoints;
use crate::numerics::quad::quad_1d;
use crate::numerics::rng::{RngStream, StreamRng};
use crate::priors::{horseshoe_mass, LengthscalePrior};
use serde::{Deserialize, Serialize};

/// Fraction of `n` prior draws whose grid sup-distance to `f0` is at most
/// `eps`. `draw` returns the draw's values at the grid points.
pub fn supball_prior_mass(
    mut draw: impl FnMut(&DesignPoints<f64>, &mut StreamRng) -> Result<Vec<f64>>,
    f0: impl Fn(&[f64]) -> f64,
    eps: f64,
    grid: &DesignPoints<f64>,
    n: usize,
    rng: RngStream,
) -> Result<Proportion> {
    if n < 100 {
        return Err(Error::InvalidConfig(format!("need at least 100 prior draws, got {n}")));
    }
    let target: Vec<f64> = grid.iter().map(&f0).collect();
    let mut r = rng.rng();
    let mut count = 0u64;
    for _ in 0..n {
        let vals = draw(grid, &mut r)?;
        if vals.len() != target.len() {
            return Err(Error::DimensionMismatch { expected: target.len(), got: vals.len() });
        }
        if vals.iter().zip(&target).all(|(v, t)| (v - t).abs() <= eps) {
            count += 1;
        }
    }
    Ok(Proportion::new(count, n as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondPrResult {
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

fn prior_mass(prior: &LengthscalePrior, a: f64, b: f64) -> Result<f64> {
    match prior {
        LengthscalePrior::Horseshoe { tau } => horseshoe_mass(a, b, *tau),
        LengthscalePrior::Exponential { .. } => {
            quad_1d(|t| prior.density(t).unwrap_or(0.0), a, b, 1e-13)
        }
        LengthscalePrior::Deterministic { .. } => {
            Err(Error::InvalidConfig("the prior-mass condition needs a lengthscale density".into()))
        }
    }
}

/// Checks `(∫₀^δ π)^{d−d*} (∫_{a*}^{2a*} π)^{d*} ≥ 2 exp(−nρε²/2)` with
/// `δ = ξ/(8d√(ρn))`, in logarithms.
#[allow(clippy::too_many_arguments)]
pub fn condpr_check(
    prior: &LengthscalePrior,
    n: usize,
    rho: f64,
    sigma0_sq: f64,
    d: usize,
    d_star: usize,
    a_star: f64,
    eps: f64,
) -> Result<CondPrResult> {
    prior.validate()?;
    if !(a_star >= 1.0) || d_star > d || d == 0 {
        return Err(Error::DomainError("need a* >= 1 and 0 <= d* <= d, d >= 1".into()));
    }
    let nf = n as f64;
    let delta = xi_const(sigma0_sq)? / (8.0 * d as f64 * (rho * nf).sqrt());
    let mut log_lhs = 0.0;
    if d > d_star {
        log_lhs += (d - d_star) as f64 * prior_mass(prior, 0.0, delta)?.ln();
    }
    if d_star > 0 {
        log_lhs += d_star as f64 * prior_mass(prior, a_star, 2.0 * a_star)?.ln();
    }
    let log_rhs = 2f64.ln() - nf * rho * eps * eps / 2.0;
    Ok(CondPrResult { log_lhs, log_rhs, lhs: log_lhs.exp(), rhs: log_rhs.exp(), satisfied: log_lhs >= log_rhs })
}

/// Smallest `nε²` allowed by the sufficient condition for an exponential
/// prior with rate λ:
/// `(2/ρ)[d log(16d√(ρn)/(ξλ)) + 2λd*a* + log 2]`, valid for
/// `λ ∈ [1/a*, 8d√(ρn)/ξ]`.
pub fn condexp_min_neps2(n: usize, rho: f64, sigma0_sq: f64, d: usize, d_star: usize, a_star: f64, lambda: f64) -> Result<f64> {
    let xi = xi_const(sigma0_sq)?;
    let (df, root) = (d as f64, (rho * n as f64).sqrt());
    if lambda < 1.0 / a_star || lambda > 8.0 * df * root / xi {
        return Err(Error::DomainError(format!("lambda {lambda} outside [1/a*, 8d sqrt(rho n)/xi]")));
    }
    Ok(2.0 / rho * (df * (16.0 * df * root / (xi * lambda)).ln() + 2.0 * lambda * d_star as f64 * a_star + 2f64.ln()))
}

/// Smallest `nε²` allowed by the sufficient condition for a horseshoe prior
/// with fixed τ:
/// `(2/ρ)[d log(8d√(ρn)/(ξe₀τ)) + d* log(10a*/τ) + log 2]`, valid for
/// `ξ/(8d√(ρn)) ≤ τ ≤ 1 ≤ a*`.
pub fn condhs_min_neps2(n: usize, rho: f64, sigma0_sq: f64, d: usize, d_star: usize, a_star: f64, tau: f64) -> Result<f64> {
    let xi = xi_const(sigma0_sq)?;
    let (df, root) = (d as f64, (rho * n as f64).sqrt());
    if tau < xi / (8.0 * df * root) || tau > 1.0 || a_star < 1.0 {
        return Err(Error::DomainError(format!("tau {tau} outside [xi/(8d sqrt(rho n)), 1] or a* < 1")));
    }
    let e0 = 2.0 * 5f64.ln() / (2.0 * std::f64::consts::PI).powf(1.5);
    Ok(2.0 / rho
        * (df * (8.0 * df * root / (xi * e0 * tau)).ln() + d_star as f64 * (10.0 * a_star / tau).ln() + 2f64.ln()))
}

/// `a*` solving `(a*)^{2β+d*} = max(B₁n/(B₂ log^{1+d*} n), 1)`.
pub fn optimal_bandwidth(b1: f64, b2: f64, n: f64, beta: f64, d_star: usize) -> Result<f64> {
    if !(b1 > 0.0 && b2 > 0.0 && n > 1.0 && beta > 0.0) {
        return Err(Error::DomainError("need B1, B2, beta > 0 and n > 1".into()));
    }
    let ratio = b1 * n / (b2 * n.ln().powi(1 + d_star as i32));
    Ok(ratio.max(1.0).powf(1.0 / (2.0 * beta + d_star as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_examples() {
        let e = std::f64::consts::E;
        assert!((optimal_bandwidth(1.0, 1.0, e, 2.0, 1).unwrap() - e.powf(0.2)).abs() < 1e-14);
        assert_eq!(optimal_bandwidth(1.0, 100.0, 10.0, 1.0, 2).unwrap(), 1.0);
        // n / log²n increases once n ≥ e², so monotonicity holds from there on
        let mut prev = 0.0;
        for n in [e * e, 10.0, 100.0, 1e4, 1e6] {
            let a = optimal_bandwidth(2.0, 1.0, n, 1.5, 1).unwrap();
            assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn condpr_empty_product() {
        let prior = LengthscalePrior::Horseshoe { tau: 0.5 };
        let r = condpr_check(&prior, 100, 0.5, 0.25, 2, 2, 1.5, 0.3).unwrap();
        let expected = 2.0 * horseshoe_mass(1.5, 3.0, 0.5).unwrap().ln();
        assert!((r.log_lhs - expected).abs() < 1e-12);
    }

    #[test]
    fn exponential_mass_matches_closed_form() {
        let p = LengthscalePrior::Exponential { lambda: 1.7 };
        let m = prior_mass(&p, 0.5, 2.0).unwrap();
        assert!((m - ((-1.7f64 * 0.5).exp() - (-1.7f64 * 2.0).exp())).abs() < 1e-12);
    }
}
