//! Log-log least-squares fits of losses against sample size.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub ns: Vec<f64>,
    pub losses: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `log(loss)` on `log(n)`.
pub fn fit_rate(ns: &[f64], losses: &[f64]) -> Result<RateFit> {
    if ns.len() != losses.len() {
        return Err(Error::DimensionMismatch { expected: ns.len(), got: losses.len() });
    }
    if ns.len() < 3 {
        return Err(Error::DegenerateInput(format!("need at least 3 points, got {}", ns.len())));
    }
    if let Some(bad) = ns.iter().chain(losses).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateInput(format!("sizes and losses must be positive, got {bad}")));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = losses.iter().map(|l| l.ln()).collect();
    let (slope, intercept, r2) = ols(&xs, &ys)?;
    Ok(RateFit { ns: ns.to_vec(), losses: losses.to_vec(), slope, intercept, r2 })
}

/// Simple linear regression `y ≈ intercept + slope·x`, returning
/// `(slope, intercept, r²)`.
pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateInput("all regressor values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, my - slope * mx, r2))
}
