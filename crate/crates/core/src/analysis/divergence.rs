//! L²(μ) loss, KL/V and Rényi divergences between Gaussian regression
//! models, and the Rényi divergence between univariate Gaussians.

use super::Estimate;
use crate::error::{Error, Result};
use crate::numerics::quad::quad_1d;
use crate::numerics::rng::{RngStream, StreamRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub kl: f64,
    pub v: f64,
    pub renyi_rho: f64,
    pub rho: f64,
}

fn squared_gaps(
    f: impl Fn(&[f64]) -> f64,
    g: impl Fn(&[f64]) -> f64,
    mut mu: impl FnMut(&mut StreamRng) -> Vec<f64>,
    n: usize,
    rng: RngStream,
) -> Vec<f64> {
    let mut r = rng.rng();
    (0..n)
        .map(|_| {
            let x = mu(&mut r);
            (f(&x) - g(&x)).powi(2)
        })
        .collect()
}

/// `∫ (f − g)² dμ` by Monte Carlo with `n` draws from `mu`.
pub fn l2_mu_loss(
    f: impl Fn(&[f64]) -> f64,
    g: impl Fn(&[f64]) -> f64,
    mu: impl FnMut(&mut StreamRng) -> Vec<f64>,
    n: usize,
    rng: RngStream,
) -> Result<Estimate> {
    if n < 2 {
        return Err(Error::InvalidConfig("need at least two Monte Carlo draws".into()));
    }
    Ok(Estimate::from_samples(&squared_gaps(f, g, mu, n, rng)))
}

/// KL and V between `N(f₀, σ₀²)` and `N(f, σ²)` regression models given
/// `m2 = ∫(f − f₀)² dμ` and `var_sq = Var_μ((f − f₀)²)`.
pub fn kl_v_from_moments(m2: f64, var_sq: f64, sigma_sq: f64, sigma0_sq: f64) -> Result<(f64, f64)> {
    if !(sigma_sq > 0.0 && sigma0_sq > 0.0) {
        return Err(Error::DomainError("variances must be > 0".into()));
    }
    let r = sigma0_sq / sigma_sq;
    let kl = 0.5 * (sigma_sq / sigma0_sq).ln() + 0.5 * (r - 1.0) + m2 / (2.0 * sigma_sq);
    let v = var_sq / (4.0 * sigma_sq * sigma_sq) + 0.5 * (r - 1.0).powi(2) + sigma0_sq * m2 / (sigma_sq * sigma_sq);
    Ok((kl, v))
}

/// `(KL, V)` of the regression model at `(f, σ²)` from the truth `(f₀, σ₀²)`,
/// with the μ-moments of `(f − f₀)²` estimated from `n` draws.
pub fn kl_v_regression(
    f: impl Fn(&[f64]) -> f64,
    f0: impl Fn(&[f64]) -> f64,
    sigma_sq: f64,
    sigma0_sq: f64,
    mu: impl FnMut(&mut StreamRng) -> Vec<f64>,
    n: usize,
    rng: RngStream,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one Monte Carlo draw".into()));
    }
    let s = squared_gaps(f, f0, mu, n, rng);
    let m2 = s.iter().sum::<f64>() / n as f64;
    let var_sq = s.iter().map(|v| (v - m2).powi(2)).sum::<f64>() / n as f64;
    kl_v_from_moments(m2, var_sq, sigma_sq, sigma0_sq)
}

/// Per-observation Rényi divergence of order ρ between the regression
/// models at `f` and `g` with common noise variance σ₀²:
/// `−(1/(1−ρ)) log ∫ exp(−(ρ−ρ²)(f−g)²/(2σ₀²)) dμ`.
pub fn renyi_regression(
    f: impl Fn(&[f64]) -> f64,
    g: impl Fn(&[f64]) -> f64,
    rho: f64,
    sigma0_sq: f64,
    mu: impl FnMut(&mut StreamRng) -> Vec<f64>,
    n: usize,
    rng: RngStream,
) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::DomainError(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(sigma0_sq > 0.0) || n == 0 {
        return Err(Error::DomainError("need sigma0^2 > 0 and at least one draw".into()));
    }
    let c = (rho - rho * rho) / (2.0 * sigma0_sq);
    let s = squared_gaps(f, g, mu, n, rng);
    let mean = s.iter().map(|v| (-c * v).exp()).sum::<f64>() / n as f64;
    Ok((-mean.ln() / (1.0 - rho)).max(0.0))
}

/// KL, V (at common noise variance σ₀²) and the order-ρ Rényi divergence
/// between the regression models at `f` and `f0`, from one set of draws.
pub fn divergence_report(
    f: impl Fn(&[f64]) -> f64,
    f0: impl Fn(&[f64]) -> f64,
    rho: f64,
    sigma0_sq: f64,
    mu: impl FnMut(&mut StreamRng) -> Vec<f64>,
    n: usize,
    rng: RngStream,
) -> Result<DivergenceReport> {
    if !(rho > 0.0 && rho < 1.0) || n == 0 {
        return Err(Error::DomainError("need rho in (0, 1) and at least one draw".into()));
    }
    let s = squared_gaps(f, f0, mu, n, rng);
    let m2 = s.iter().sum::<f64>() / n as f64;
    let var_sq = s.iter().map(|v| (v - m2).powi(2)).sum::<f64>() / n as f64;
    let (kl, v) = kl_v_from_moments(m2, var_sq, sigma0_sq, sigma0_sq)?;
    let c = (rho - rho * rho) / (2.0 * sigma0_sq);
    let mean = s.iter().map(|v| (-c * v).exp()).sum::<f64>() / n as f64;
    Ok(DivergenceReport { kl, v, renyi_rho: (-mean.ln() / (1.0 - rho)).max(0.0), rho })
}

/// `(∫(f − g)² dμ, Var_μ((f − g)²))` for μ uniform on `[−1, 1]`, by quadrature.
pub fn gap_moments_uniform_1d(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let gap = |x: f64| (f(x) - g(x)).powi(2);
    let m2 = 0.5 * quad_1d(gap, -1.0, 1.0, 1e-13)?;
    let m4 = 0.5 * quad_1d(|x| gap(x).powi(2), -1.0, 1.0, 1e-13)?;
    Ok((m2, (m4 - m2 * m2).max(0.0)))
}

/// [`kl_v_regression`] for μ uniform on `[−1, 1]` with the moments computed
/// by quadrature.
pub fn kl_v_regression_uniform_1d(f: impl Fn(f64) -> f64, f0: impl Fn(f64) -> f64, sigma_sq: f64, sigma0_sq: f64) -> Result<(f64, f64)> {
    let (m2, var_sq) = gap_moments_uniform_1d(f, f0)?;
    kl_v_from_moments(m2, var_sq, sigma_sq, sigma0_sq)
}

/// [`renyi_regression`] for μ uniform on `[−1, 1]`, by quadrature.
pub fn renyi_regression_uniform_1d(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, rho: f64, sigma0_sq: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) || !(sigma0_sq > 0.0) {
        return Err(Error::DomainError("need rho in (0, 1) and sigma0^2 > 0".into()));
    }
    let c = (rho - rho * rho) / (2.0 * sigma0_sq);
    let mean = 0.5 * quad_1d(|x| (-c * (f(x) - g(x)).powi(2)).exp(), -1.0, 1.0, 1e-13)?;
    Ok((-mean.ln() / (1.0 - rho)).max(0.0))
}

/// `(ρ/(2σ₀²)) e^{−2(ρ−ρ²)/σ₀²} ‖f − g‖²`, a lower bound on the Rényi
/// divergence when `|f|, |g| ≤ 1`.
pub fn renyi_l2_lower_bound(l2_sq: f64, rho: f64, sigma0_sq: f64) -> f64 {
    rho / (2.0 * sigma0_sq) * (-2.0 * (rho - rho * rho) / sigma0_sq).exp() * l2_sq
}

/// Rényi divergence of order `b` of `N(m1, s1²)` from `N(m2, s2²)`:
/// `b(m1−m2)²/(2σ_b²) + (1/(1−b)) log(σ_b/(s1^{1−b} s2^b))`,
/// `σ_b² = (1−b)s1² + b s2²`.
pub fn renyi_gaussian_1d(m1: f64, s1_sq: f64, m2: f64, s2_sq: f64, b: f64) -> Result<f64> {
    if !(s1_sq > 0.0 && s2_sq > 0.0) {
        return Err(Error::DomainError("variances must be > 0".into()));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::DomainError(format!("order must lie in (0, 1), got {b}")));
    }
    let sb_sq = (1.0 - b) * s1_sq + b * s2_sq;
    let log_term = 0.5 * sb_sq.ln() - 0.5 * (1.0 - b) * s1_sq.ln() - 0.5 * b * s2_sq.ln();
    Ok(b * (m1 - m2).powi(2) / (2.0 * sb_sq) + log_term / (1.0 - b))
}

#[cfg(test)]
mod tests {
    use super::super::uniform_mu;
    use super::*;

    #[test]
    fn l2_examples() {
        let z = l2_mu_loss(|x| x[0], |x| x[0], uniform_mu(1), 100, RngStream::new(1, 0)).unwrap();
        assert_eq!((z.value, z.se), (0.0, 0.0));
        let c = l2_mu_loss(|_| 0.7, |_| 0.2, uniform_mu(2), 100, RngStream::new(1, 0)).unwrap();
        assert!((c.value - 0.25).abs() < 1e-15 && c.se < 1e-15);
        let e = l2_mu_loss(|x| x[0], |_| 0.0, uniform_mu(1), 100_000, RngStream::new(2, 0)).unwrap();
        assert!((e.value - 1.0 / 3.0).abs() < 3.0 * e.se);
    }

    #[test]
    fn kl_v_examples() {
        let (kl, v) = kl_v_regression(|x| x[0], |x| x[0], 0.3, 0.3, uniform_mu(1), 10, RngStream::new(0, 0)).unwrap();
        assert_eq!((kl, v), (0.0, 0.0));
        let (kl, v) = kl_v_regression(|_| 0.4, |_| 0.1, 0.5, 0.5, uniform_mu(1), 10, RngStream::new(0, 0)).unwrap();
        assert!((kl - 0.09 / 1.0).abs() < 1e-14);
        assert!((v - 0.09 / 0.5).abs() < 1e-14);
        let (kl, _) = kl_v_from_moments(0.0, 0.0, 2.0, 1.0).unwrap();
        assert!((kl - (0.5 * 2f64.ln() - 0.25)).abs() < 1e-15);
        assert!((kl - 0.0966).abs() < 1e-4);
    }

    #[test]
    fn renyi_examples() {
        let r = renyi_regression(|x| x[0], |x| x[0], 0.5, 1.0, uniform_mu(1), 50, RngStream::new(0, 0)).unwrap();
        assert_eq!(r, 0.0);
        let r = renyi_regression(|_| 0.6, |_| 0.1, 0.3, 0.4, uniform_mu(1), 50, RngStream::new(0, 0)).unwrap();
        assert!((r - 0.3 * 0.25 / 0.8).abs() < 1e-12);
    }

    #[test]
    fn renyi_gaussian_examples() {
        assert_eq!(renyi_gaussian_1d(0.3, 2.0, 0.3, 2.0, 0.4).unwrap(), 0.0);
        assert!((renyi_gaussian_1d(1.0, 0.5, 0.0, 0.5, 0.3).unwrap() - 0.3 / 1.0).abs() < 1e-14);
        assert!((renyi_gaussian_1d(0.0, 1.0, 0.0, 2.0, 0.5).unwrap() - 0.058_891).abs() < 1e-5);
    }
}
