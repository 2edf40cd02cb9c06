//! Special functions: the exponential integral E₁ and thin wrappers around
//! `statrs` for the Gamma and error functions.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// E₁(x) = ∫₁^∞ e^{−xv}/v dv for x > 0.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::DomainError(format!("E1 needs x > 0, got {x}")));
    }
    Ok(if x <= 1.0 { e1_series(x) } else { e1_scaled_cf(x) * (-x).exp() })
}

/// eˣ·E₁(x), finite for every x > 0 (no overflow for large x).
pub fn exp_scaled_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::DomainError(format!("E1 needs x > 0, got {x}")));
    }
    Ok(if x <= 1.0 { x.exp() * e1_series(x) } else { e1_scaled_cf(x) })
}

fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut fact = 1.0;
    for k in 1..100 {
        fact *= -x / k as f64;
        let term = fact / k as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

// Modified Lentz evaluation of the continued fraction for eˣE₁(x), x > 1.
fn e1_scaled_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn erf(x: f64) -> f64 {
    statrs::function::erf::erf(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_distance(samples: &[f64], mut cdf: impl FnMut(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Asymptotic p-value of a one-sample KS statistic `d` with `n` samples.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
