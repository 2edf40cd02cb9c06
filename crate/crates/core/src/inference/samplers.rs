//! Single-site MCMC transitions: elliptical slice sampling for Gaussian
//! weights, log-scale random-walk Metropolis for lengthscales and a slice
//! sampler for the noise variance.

use crate::error::{Error, Result};
use crate::priors::{LengthscalePrior, SigmaPrior};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, TAU};

/// Upper bound on bracket shrinkages in one elliptical slice step. The
/// bracket always contains the current point, so this is never reached in
/// exact arithmetic.
const MAX_SHRINKS: usize = 10_000;

/// `ρ Σ_i [−(Y_i − f_i)²/(2σ²) − ½ log(2πσ²)]`.
pub fn tempered_loglik(fvals: &[f64], y: &[f64], sigma_sq: f64, rho: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::DomainError(format!("sigma^2 must be > 0, got {sigma_sq}")));
    }
    if fvals.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: fvals.len() });
    }
    Ok(tempered_loglik_unchecked(fvals, y, sigma_sq, rho))
}

pub(crate) fn tempered_loglik_unchecked(fvals: &[f64], y: &[f64], sigma_sq: f64, rho: f64) -> f64 {
    let ss: f64 = fvals.iter().zip(y).map(|(f, y)| (y - f) * (y - f)).sum();
    rho * (-ss / (2.0 * sigma_sq) - 0.5 * y.len() as f64 * (2.0 * PI * sigma_sq).ln())
}

/// Elliptical slice step over the angle of the ellipse through the current
/// point and an auxiliary prior draw. `ll_at(θ)` is the log-likelihood at
/// `x cos θ + ν sin θ`. Returns the accepted angle, its log-likelihood and
/// the number of likelihood evaluations.
pub fn ess_angle<R: Rng + ?Sized>(cur_ll: f64, mut ll_at: impl FnMut(f64) -> f64, rng: &mut R) -> (f64, f64, usize) {
    let u: f64 = rng.random();
    let log_y = cur_ll + u.ln();
    let mut theta = rng.random_range(0.0..TAU);
    let (mut lo, mut hi) = (theta - TAU, theta);
    for evals in 1..=MAX_SHRINKS {
        let ll = ll_at(theta);
        if ll > log_y {
            return (theta, ll, evals);
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        theta = rng.random_range(lo..hi.max(lo + f64::MIN_POSITIVE));
    }
    (0.0, cur_ll, MAX_SHRINKS)
}

/// One elliptical slice transition for a weight vector with a standard
/// normal prior. Returns the new weights and their log-likelihood.
pub fn ess_step<R: Rng + ?Sized>(weights: &[f64], cur_ll: f64, mut loglik: impl FnMut(&[f64]) -> f64, rng: &mut R) -> (Vec<f64>, f64) {
    let nu: Vec<f64> = (0..weights.len()).map(|_| rng.sample(StandardNormal)).collect();
    let mix = |theta: f64| -> Vec<f64> {
        let (s, c) = theta.sin_cos();
        weights.iter().zip(&nu).map(|(w, v)| w * c + v * s).collect()
    };
    let (theta, ll, _) = ess_angle(cur_ll, |t| loglik(&mix(t)), rng);
    (mix(theta), ll)
}

/// Metropolis–Hastings step on one lengthscale with proposal
/// `A′ = A·exp(step·z)`. Returns `(A, loglik, accepted)`.
pub fn mh_lengthscale_step<R: Rng + ?Sized>(
    a: f64,
    cur_ll: f64,
    prior: &LengthscalePrior,
    step: f64,
    mut loglik: impl FnMut(f64) -> f64,
    rng: &mut R,
) -> (f64, f64, bool) {
    if step == 0.0 || prior.is_deterministic() {
        return (a, cur_ll, true);
    }
    let z: f64 = rng.sample(StandardNormal);
    let prop = a * (step * z).exp();
    let u: f64 = rng.random();
    let lp_cur = prior.log_density(a).unwrap_or(0.0);
    let lp_prop = prior.log_density(prop).unwrap_or(f64::NEG_INFINITY);
    if !(prop > 0.0 && prop.is_finite()) || lp_prop == f64::NEG_INFINITY {
        return (a, cur_ll, false);
    }
    let ll = loglik(prop);
    let log_ratio = ll - cur_ll + lp_prop - lp_cur + (prop / a).ln();
    if u.ln() < log_ratio {
        (prop, ll, true)
    } else {
        (a, cur_ll, false)
    }
}

/// Univariate slice sampler with stepping out (width `w`, at most
/// `max_steps` expansions each side) and shrinkage.
pub fn slice_sample<R: Rng + ?Sized>(x0: f64, mut logf: impl FnMut(f64) -> f64, w: f64, max_steps: usize, rng: &mut R) -> f64 {
    let f0 = logf(x0);
    let log_y = f0 + rng.random::<f64>().ln();
    let mut lo = x0 - w * rng.random::<f64>();
    let mut hi = lo + w;
    let j = rng.random_range(0..max_steps.max(1));
    let k = max_steps.max(1) - 1 - j;
    for _ in 0..j {
        if logf(lo) <= log_y {
            break;
        }
        lo -= w;
    }
    for _ in 0..k {
        if logf(hi) <= log_y {
            break;
        }
        hi += w;
    }
    for _ in 0..MAX_SHRINKS {
        let x = rng.random_range(lo..hi);
        if logf(x) > log_y {
            return x;
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
    }
    x0
}

/// Log full conditional of `σ²` (up to a constant) given the residual sum of
/// squares `ss` of `n` observations under the Gamma prior.
pub fn sigma2_log_conditional(s2: f64, ss: f64, n: usize, prior: &SigmaPrior) -> f64 {
    if !(s2 > 0.0) {
        return f64::NEG_INFINITY;
    }
    (prior.shape() - 1.0 - 0.5 * n as f64) * s2.ln() - prior.rate() * s2 - ss / (2.0 * s2)
}

/// One slice transition on `log σ²` targeting the full conditional.
pub fn sigma2_step<R: Rng + ?Sized>(sigma_sq: f64, ss: f64, n: usize, prior: &SigmaPrior, rng: &mut R) -> f64 {
    let logf = |v: f64| sigma2_log_conditional(v.exp(), ss, n, prior) + v;
    slice_sample(sigma_sq.ln(), logf, 1.0, 50, rng).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::quad_0_inf;
    use crate::numerics::rng::RngStream;
    use crate::numerics::special::{ks_distance, ks_pvalue, normal_cdf};
    use crate::priors::horseshoe_cdf;

    #[test]
    fn loglik_examples() {
        let y = [0.1, -0.4, 0.9];
        let f = [0.0, 0.2, 0.5];
        let full = tempered_loglik(&f, &y, 0.3, 1.0).unwrap();
        let ss: f64 = f.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!((full - (-ss / 0.6 - 1.5 * (2.0 * PI * 0.3).ln())).abs() < 1e-12);
        let half = tempered_loglik(&f, &y, 0.3, 0.5).unwrap();
        let inflated = tempered_loglik(&f, &y, 0.6, 1.0).unwrap();
        // the gap does not depend on f
        let g = [0.3, 0.3, -0.2];
        let gap = tempered_loglik(&g, &y, 0.3, 0.5).unwrap() - tempered_loglik(&g, &y, 0.6, 1.0).unwrap();
        assert!((half - inflated - gap).abs() < 1e-12);
        let expected = 0.5 * 1.5 * (2.0 * PI * 0.3).ln() - 1.5 * 0.5f64.ln();
        assert!((gap - expected).abs() < 1e-12);
        let zero = tempered_loglik(&y, &y, 0.3, 0.7).unwrap();
        assert!((zero + 0.7 * 1.5 * (2.0 * PI * 0.3).ln()).abs() < 1e-12);
        assert!(tempered_loglik(&f, &y, 0.0, 1.0).is_err());
    }

    #[test]
    fn ess_flat_likelihood_keeps_prior() {
        let mut rng = RngStream::new(21, 0).rng();
        let mut w = vec![0.0; 3];
        let mut draws = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            w = ess_step(&w, 0.0, |_| 0.0, &mut rng).0;
            draws.push(w[0]);
        }
        let d = ks_distance(&draws, normal_cdf);
        // ESS with a flat likelihood draws independently from the prior
        assert!(ks_pvalue(d, draws.len()) >= 0.01, "KS {d}");
    }

    #[test]
    fn ess_gaussian_likelihood_posterior() {
        // prior N(0,1), likelihood N(y | w, 0.5²) with y = 1: posterior N(0.8, 0.2)
        let mut rng = RngStream::new(22, 0).rng();
        let ll = |w: &[f64]| -(1.0 - w[0]).powi(2) / (2.0 * 0.25);
        let mut w = vec![0.0];
        let mut cur = ll(&w);
        let (mut s, mut s2) = (0.0, 0.0);
        let n = 50_000;
        for _ in 0..n {
            let (nw, nl) = ess_step(&w, cur, ll, &mut rng);
            w = nw;
            cur = nl;
            s += w[0];
            s2 += w[0] * w[0];
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 0.8).abs() < 0.02, "{mean}");
        assert!((var - 0.2).abs() < 0.02, "{var}");
    }

    #[test]
    fn mh_zero_step_is_identity() {
        let mut rng = RngStream::new(1, 0).rng();
        let prior = LengthscalePrior::Horseshoe { tau: 1.0 };
        let (a, ll, acc) = mh_lengthscale_step(0.7, -3.0, &prior, 0.0, |_| panic!("no evaluation"), &mut rng);
        assert_eq!((a, ll, acc), (0.7, -3.0, true));
    }

    #[test]
    fn mh_flat_likelihood_targets_horseshoe() {
        let mut rng = RngStream::new(5, 0).rng();
        let prior = LengthscalePrior::Horseshoe { tau: 1.0 };
        let mut a = 1.0;
        let mut draws = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            a = mh_lengthscale_step(a, 0.0, &prior, 2.5, |_| 0.0, &mut rng).0;
            draws.push(a);
        }
        let grid: Vec<f64> = (0..=300).map(|i| 10f64.powf(-8.0 + 14.0 * i as f64 / 300.0)).collect();
        let cdf: Vec<f64> = grid.iter().map(|&g| horseshoe_cdf(g, 1.0).unwrap()).collect();
        let interp = |x: f64| match grid.iter().position(|&g| g >= x) {
            None => 1.0,
            Some(0) => cdf[0],
            Some(k) => {
                let t = (x.ln() - grid[k - 1].ln()) / (grid[k].ln() - grid[k - 1].ln());
                cdf[k - 1] + t * (cdf[k] - cdf[k - 1])
            }
        };
        let d = ks_distance(&draws, interp);
        assert!(d <= 0.02, "KS {d}");
    }

    #[test]
    fn mh_exponential_prior_mean() {
        let mut rng = RngStream::new(6, 0).rng();
        let prior = LengthscalePrior::Exponential { lambda: 2.0 };
        let mut a = 1.0;
        let n = 200_000;
        let mut s = 0.0;
        for _ in 0..n {
            a = mh_lengthscale_step(a, 0.0, &prior, 1.0, |_| 0.0, &mut rng).0;
            s += a;
        }
        assert!((s / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn sigma2_prior_only_mean() {
        let prior = SigmaPrior::new(0.5, 0).unwrap();
        let mut rng = RngStream::new(30, 0).rng();
        let mut s2 = 1.0;
        let n = 40_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                s2 = sigma2_step(s2, 0.0, 0, &prior, &mut rng);
                s2
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // batch-means standard error
        let batches: Vec<f64> = xs.chunks(1000).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let bm = batches.iter().sum::<f64>() / batches.len() as f64;
        let se = (batches.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (batches.len() - 1) as f64 / batches.len() as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se + 1e-3, "mean {mean} se {se}");
    }

    #[test]
    fn sigma2_conditional_matches_quadrature() {
        let (n, ss) = (12, 3.0);
        let prior = SigmaPrior::new(0.4, n).unwrap();
        let z = quad_0_inf(|s| sigma2_log_conditional(s, ss, n, &prior).exp(), 1e-12).unwrap();
        let mean = quad_0_inf(|s| s * sigma2_log_conditional(s, ss, n, &prior).exp(), 1e-12).unwrap() / z;
        let cdf_at = |t: f64| crate::numerics::quad::quad_1d(|s| sigma2_log_conditional(s, ss, n, &prior).exp(), 0.0, t, 1e-12).unwrap() / z;
        let mut rng = RngStream::new(31, 0).rng();
        let mut s2 = mean;
        let draws: Vec<f64> = (0..30_000)
            .map(|_| {
                s2 = sigma2_step(s2, ss, n, &prior, &mut rng);
                s2
            })
            .collect();
        let grid: Vec<f64> = (1..=200).map(|i| mean * 4.0 * i as f64 / 200.0).collect();
        let cdf: Vec<f64> = grid.iter().map(|&g| cdf_at(g)).collect();
        let interp = |x: f64| match grid.iter().position(|&g| g >= x) {
            None => 1.0,
            Some(0) => cdf[0] * x / grid[0],
            Some(k) => cdf[k - 1] + (x - grid[k - 1]) / (grid[k] - grid[k - 1]) * (cdf[k] - cdf[k - 1]),
        };
        assert!(ks_distance(&draws, interp) < 0.02);
    }

    #[test]
    fn sigma2_stays_in_credible_interval() {
        let (n, ss) = (20, 5.0);
        let prior = SigmaPrior::new(0.5, n).unwrap();
        let f = |s: f64| sigma2_log_conditional(s, ss, n, &prior).exp();
        let z = quad_0_inf(f, 1e-12).unwrap();
        let cdf = |t: f64| crate::numerics::quad::quad_1d(f, 0.0, t, 1e-12).unwrap() / z;
        let bisect = |p: f64| {
            let (mut lo, mut hi) = (1e-6, 100.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let (lo, hi) = (bisect(0.005), bisect(0.995));
        // mode of the conditional in σ²
        let k = prior.shape() - 1.0 - 0.5 * n as f64;
        let b = prior.rate();
        let mode = (k + (k * k + 2.0 * b * ss).sqrt()) / (2.0 * b);
        let mut rng = RngStream::new(32, 0).rng();
        let mut s2 = mode;
        let mut outside = 0;
        for _ in 0..1000 {
            s2 = sigma2_step(s2, ss, n, &prior, &mut rng);
            if s2 < lo || s2 > hi {
                outside += 1;
            }
        }
        // 1% of stationary draws fall outside on average
        assert!(outside <= 30, "{outside} draws outside [{lo}, {hi}]");
    }
}
