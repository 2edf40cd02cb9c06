//! Diagnostics: divergences in regression form, prior-mass and
//! concentration-function estimators, the posterior-equivalence identity and
//! rate fitting.

mod concentration;
mod divergence;
mod equivalence;
mod prior_mass;
mod rate;
mod report;

pub use concentration::{
    concentration_fn, rkhs_approx_term, small_ball_neglog, ConcentrationEstimate, GridSampler, NegLogProb,
};
pub use divergence::{
    divergence_report, gap_moments_uniform_1d, kl_v_from_moments, kl_v_regression, kl_v_regression_uniform_1d, l2_mu_loss,
    renyi_gaussian_1d, renyi_l2_lower_bound, renyi_regression, renyi_regression_uniform_1d, DivergenceReport,
};
pub use equivalence::{posterior_equivalence_check, Atom, EquivalenceResult};
pub use prior_mass::{
    condexp_min_neps2, condhs_min_neps2, condpr_check, optimal_bandwidth, supball_prior_mass, CondPrResult,
};
pub use rate::{fit_rate, RateFit};
pub use report::{digest, Report};

use crate::error::{Error, Result};
use crate::numerics::rng::StreamRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// `ξ = 2σ₀²/√(1 + 4σ₀²)`.
pub fn xi_const(sigma0_sq: f64) -> Result<f64> {
    if !(sigma0_sq > 0.0) {
        return Err(Error::DomainError(format!("sigma0^2 must be > 0, got {sigma0_sq}")));
    }
    Ok(2.0 * sigma0_sq / (1.0 + 4.0 * sigma0_sq).sqrt())
}

/// Monte Carlo estimate with its standard error and a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub ci: (f64, f64),
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let se = (var / n).sqrt();
        Self { value: mean, se, ci: (mean - 1.96 * se, mean + 1.96 * se) }
    }
}

/// A proportion with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub count: u64,
    pub n: u64,
    pub p: f64,
    pub ci: (f64, f64),
}

impl Proportion {
    pub fn new(count: u64, n: u64) -> Self {
        let (lo, hi) = wilson_interval(count, n, 1.96);
        Self { count, n, p: count as f64 / n as f64, ci: (lo, hi) }
    }
}

pub fn wilson_interval(count: u64, n: u64, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = count as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Uniform measure on `[−1, 1]^d`.
pub fn uniform_mu(d: usize) -> impl FnMut(&mut StreamRng) -> Vec<f64> {
    move |rng| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()
}
