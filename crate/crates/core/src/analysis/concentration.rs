//! Estimators for the two terms of the concentration function of a
//! rescaled squared-exponential process.

use super::wilson_interval;
use crate::error::{Error, Result};
use crate::kernels::{sqexp_cov, sqexp_gram, DesignPoints, Lengthscales};
use crate::numerics::linalg::{cholesky_with_jitter, default_jitter_schedule, CholFactor, PsdMatrix};
use crate::numerics::rng::{RngStream, StreamRng};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Exact sampler of `W^A` at a fixed set of grid points.
#[derive(Debug, Clone)]
pub struct GridSampler {
    chol: CholFactor<f64>,
}

impl GridSampler {
    pub fn new(a: &Lengthscales<f64>, grid: &DesignPoints<f64>) -> Result<Self> {
        let k = sqexp_gram(grid, a)?;
        let chol = cholesky_with_jitter(&k, &default_jitter_schedule(&k))?;
        Ok(Self { chol })
    }

    pub fn len(&self) -> usize {
        self.chol.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.chol.mul_lower(&z)
    }

    /// Draws grid values one at a time and stops at the first value with
    /// `|W| ≥ eps`; returns whether the whole path stayed inside.
    pub fn stays_within(&self, eps: f64, rng: &mut StreamRng) -> bool {
        let n = self.len();
        let l = &self.chol.l;
        let mut z = Vec::with_capacity(n);
        for i in 0..n {
            z.push(rng.sample::<f64, _>(StandardNormal));
            let v: f64 = (0..=i).map(|k| l[(i, k)] * z[k]).sum();
            if v.abs() >= eps {
                return false;
            }
        }
        true
    }
}

/// `−log P(‖W^A‖_∞ < ε)` on a grid, with the interval induced by the Wilson
/// interval for the probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegLogProb {
    pub value: f64,
    pub ci: (f64, f64),
    pub count: u64,
    pub n: u64,
}

pub fn small_ball_neglog(a: &Lengthscales<f64>, eps: f64, grid: &DesignPoints<f64>, n: usize, rng: RngStream) -> Result<NegLogProb> {
    if !(eps > 0.0) {
        return Err(Error::DomainError(format!("eps must be > 0, got {eps}")));
    }
    let sampler = GridSampler::new(a, grid)?;
    let mut r = rng.rng();
    let count = (0..n).filter(|_| sampler.stays_within(eps, &mut r)).count() as u64;
    if count == 0 {
        return Err(Error::EventTooRare { draws: n });
    }
    let (lo, hi) = wilson_interval(count, n as u64, 1.96);
    let p = count as f64 / n as f64;
    Ok(NegLogProb { value: -p.ln(), ci: (-hi.ln(), -lo.ln()), count, n: n as u64 })
}

/// `inf ½‖h‖²_H` over `h` in the span of kernel sections at the anchors with
/// grid sup-distance at most `eps` from `f0`, searched along a path of ridge
/// penalties.
pub fn rkhs_approx_term(
    f0: impl Fn(&[f64]) -> f64,
    a: &Lengthscales<f64>,
    anchors: &DesignPoints<f64>,
    eval_grid: &DesignPoints<f64>,
    eps: f64,
    reg_path: &[f64],
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::DomainError(format!("eps must be > 0, got {eps}")));
    }
    let target_eval: Vec<f64> = eval_grid.iter().map(&f0).collect();
    let target_anchor: Vec<f64> = anchors.iter().map(&f0).collect();
    let sup0 = target_eval.iter().chain(&target_anchor).fold(0.0f64, |m, v| m.max(v.abs()));
    if sup0 <= eps {
        return Ok(0.0);
    }
    let k = sqexp_gram(anchors, a)?;
    let cross = sqexp_cov(eval_grid, anchors, a)?;
    let mut best: Option<f64> = None;
    for &lambda in reg_path {
        let n = anchors.len();
        let reg = PsdMatrix::from_lower_fn(n, |i, j| k.matrix()[(i, j)] + if i == j { lambda } else { 0.0 });
        let Ok(chol) = cholesky_with_jitter(&reg, &default_jitter_schedule(&reg)) else { continue };
        let c = chol.solve(&target_anchor)?;
        let h_eval = cross.matvec(&c)?;
        let h_anchor = k.matrix().matvec(&c)?;
        let err = h_eval
            .iter()
            .zip(&target_eval)
            .chain(h_anchor.iter().zip(&target_anchor))
            .fold(0.0f64, |m, (h, t)| m.max((h - t).abs()));
        if err <= eps {
            let norm = 0.5 * c.iter().zip(&h_anchor).map(|(a, b)| a * b).sum::<f64>();
            best = Some(best.map_or(norm, |b| b.min(norm)));
        }
    }
    best.ok_or(Error::Infeasible { eps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationEstimate {
    pub eps: f64,
    pub approx_term: f64,
    pub small_ball: NegLogProb,
    pub total: f64,
}

/// Both terms evaluated at `ε/2`.
#[allow(clippy::too_many_arguments)]
pub fn concentration_fn(
    f0: impl Fn(&[f64]) -> f64,
    a: &Lengthscales<f64>,
    eps: f64,
    anchors: &DesignPoints<f64>,
    eval_grid: &DesignPoints<f64>,
    ball_grid: &DesignPoints<f64>,
    n: usize,
    reg_path: &[f64],
    rng: RngStream,
) -> Result<ConcentrationEstimate> {
    let approx_term = rkhs_approx_term(f0, a, anchors, eval_grid, eps / 2.0, reg_path)?;
    let small_ball = small_ball_neglog(a, eps / 2.0, ball_grid, n, rng)?;
    Ok(ConcentrationEstimate { eps, approx_term, small_ball, total: approx_term + small_ball.value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huge_eps_is_certain() {
        let a = Lengthscales::new(vec![1.0]).unwrap();
        let g = DesignPoints::grid(30, 1);
        let r = small_ball_neglog(&a, 8.0, &g, 2000, RngStream::new(1, 0)).unwrap();
        assert!(r.value < 1e-3);
    }

    #[test]
    fn zero_target_needs_nothing() {
        let a = Lengthscales::new(vec![2.0]).unwrap();
        let g = DesignPoints::grid(20, 1);
        assert_eq!(rkhs_approx_term(|_| 0.0, &a, &g, &g, 0.1, &[1e-3]).unwrap(), 0.0);
        assert_eq!(rkhs_approx_term(|x| 0.3 * x[0], &a, &g, &g, 0.3, &[1e-3]).unwrap(), 0.0);
    }

    #[test]
    fn infeasible_when_path_too_coarse() {
        let a = Lengthscales::new(vec![1.0]).unwrap();
        let g = DesignPoints::grid(20, 1);
        let r = rkhs_approx_term(|x| x[0], &a, &g, &g, 0.01, &[100.0]);
        assert!(matches!(r, Err(Error::Infeasible { .. })));
    }
}
