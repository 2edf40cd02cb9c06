//! Lengthscale priors, the clip map Ψ, single-layer and deep HGP prior
//! samplers, and the Gamma prior on the noise variance.

use crate::error::{Error, Result};
use crate::kernels::{rff_path_from, GpPathRep, Lengthscales};
use crate::numerics::quad::{quad_1d, quad_semi_infinite};
use crate::numerics::rng::RngStream;
use crate::numerics::special::{exp_scaled_e1, ln_gamma};
use crate::scalar::Real;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Ψ(x) = (x ∧ 1) ∨ (−1).
#[inline]
pub fn clip_psi<T: Real>(x: T) -> T {
    x.min(T::one()).max(-T::one())
}

/// Prior on each inverse-bandwidth `A_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LengthscalePrior {
    Horseshoe { tau: f64 },
    Exponential { lambda: f64 },
    Deterministic { values: Vec<f64> },
}

impl LengthscalePrior {
    pub fn validate(&self) -> Result<()> {
        match self {
            LengthscalePrior::Horseshoe { tau } if !(*tau > 0.0 && tau.is_finite()) => {
                Err(Error::InvalidConfig(format!("horseshoe tau must be > 0, got {tau}")))
            }
            LengthscalePrior::Exponential { lambda } if !(*lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidConfig(format!("exponential lambda must be > 0, got {lambda}")))
            }
            LengthscalePrior::Deterministic { values } => Lengthscales::new(values.clone()).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, LengthscalePrior::Deterministic { .. })
    }

    /// Log density at `a`; `-inf` outside the support. Point-mass priors
    /// have no density and return `None`.
    pub fn log_density(&self, a: f64) -> Option<f64> {
        match *self {
            LengthscalePrior::Horseshoe { tau } => Some(horseshoe_log_density(a, tau)),
            LengthscalePrior::Exponential { lambda } => {
                Some(if a > 0.0 { lambda.ln() - lambda * a } else { f64::NEG_INFINITY })
            }
            LengthscalePrior::Deterministic { .. } => None,
        }
    }

    pub fn density(&self, a: f64) -> Option<f64> {
        self.log_density(a).map(f64::exp)
    }
}

fn horseshoe_const(tau: f64) -> f64 {
    2.0 / ((2.0 * PI.powi(3)).sqrt() * tau)
}

/// Horseshoe density `π_τ(t) = 2 e^{t²/2τ²} E₁(t²/2τ²) / (√(2π³) τ)`.
pub fn horseshoe_density(t: f64, tau: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::DomainError(format!("horseshoe density needs t > 0, got {t}")));
    }
    if !(tau > 0.0) {
        return Err(Error::DomainError(format!("horseshoe density needs tau > 0, got {tau}")));
    }
    let x = t * t / (2.0 * tau * tau);
    Ok(horseshoe_const(tau) * exp_scaled_e1(x)?)
}

pub fn horseshoe_log_density(t: f64, tau: f64) -> f64 {
    horseshoe_density(t, tau).map_or(f64::NEG_INFINITY, f64::ln)
}

/// The closed-form lower and upper envelopes of the horseshoe density:
/// `(2/((2π)^{3/2}τ)) log(1 + 4τ²/t²)` and `(2/(√(2π³)τ)) log(1 + 2τ²/t²)`.
pub fn horseshoe_density_bounds(t: f64, tau: f64) -> (f64, f64) {
    let r = tau * tau / (t * t);
    let lower = 2.0 / ((2.0 * PI).powf(1.5) * tau) * (4.0 * r).ln_1p();
    let upper = horseshoe_const(tau) * (2.0 * r).ln_1p();
    (lower, upper)
}

/// `P(X_τ ≤ t)` by quadrature of the density.
pub fn horseshoe_cdf(t: f64, tau: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let dens = |s: f64| horseshoe_density(s, tau).unwrap_or(0.0);
    if t <= tau {
        quad_1d(dens, 0.0, t, 1e-11)
    } else {
        Ok(1.0 - quad_semi_infinite(dens, t, 1e-11)?)
    }
}

/// `∫ₐᵇ π_τ`.
pub fn horseshoe_mass(a: f64, b: f64, tau: f64) -> Result<f64> {
    Ok(horseshoe_cdf(b, tau)? - horseshoe_cdf(a, tau)?)
}

/// Half-Cauchy scale then half-normal draw.
pub fn horseshoe_sample<R: Rng + ?Sized>(tau: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let xi = (0.5 * PI * u).tan();
    let z: f64 = rng.sample(StandardNormal);
    tau * xi * z.abs()
}

/// `d` independent draws from `prior`.
pub fn sample_lengthscales<R: Rng + ?Sized>(prior: &LengthscalePrior, d: usize, rng: &mut R) -> Result<Lengthscales<f64>> {
    prior.validate()?;
    match prior {
        LengthscalePrior::Horseshoe { tau } => Lengthscales::new((0..d).map(|_| horseshoe_sample(*tau, rng)).collect()),
        LengthscalePrior::Exponential { lambda } => {
            let e = Exp::new(*lambda).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Lengthscales::new((0..d).map(|_| e.sample(rng)).collect())
        }
        LengthscalePrior::Deterministic { values } => {
            if values.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: values.len() });
            }
            Lengthscales::new(values.clone())
        }
    }
}

/// Deterministic scalings that freeze inactive coordinates:
/// `n^{1/(2β+|S₀|)}` on the (0-based) active set and `n^{−1/2}` elsewhere.
pub fn freeze_scales(n: usize, beta: f64, active_set: &[usize], d: usize) -> Result<Lengthscales<f64>> {
    if active_set.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    if n == 0 || !(beta > 0.0) {
        return Err(Error::DomainError(format!("freeze scales need n >= 1 and beta > 0 (n={n}, beta={beta})")));
    }
    if let Some(&bad) = active_set.iter().find(|&&i| i >= d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad + 1 });
    }
    let nf = n as f64;
    let active = nf.powf(1.0 / (2.0 * beta + active_set.len() as f64));
    let inactive = 1.0 / nf.sqrt();
    Lengthscales::new((0..d).map(|i| if active_set.contains(&i) { active } else { inactive }).collect())
}

/// One draw of the single-layer HGP-type prior: lengthscales, then a
/// random-feature path. Ψ is applied at evaluation time.
pub fn hgp_prior_draw(prior: &LengthscalePrior, d: usize, m: usize, rng: RngStream) -> Result<(Lengthscales<f64>, GpPathRep<f64>)> {
    hgp_prior_draw_from(prior, d, m, &mut rng.rng())
}

fn hgp_prior_draw_from<R: Rng + ?Sized>(prior: &LengthscalePrior, d: usize, m: usize, rng: &mut R) -> Result<(Lengthscales<f64>, GpPathRep<f64>)> {
    if d == 0 || m == 0 {
        return Err(Error::DomainError("hgp draw needs d, m >= 1".into()));
    }
    let a = sample_lengthscales(prior, d, rng)?;
    let path = rff_path_from(&a, m, rng);
    Ok((a, path))
}

/// Fixed-depth, fixed-width Deep-HGP: widths `d₀, …, d_{q+1}` (last = 1)
/// and one horseshoe scale per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepArchitecture {
    pub widths: Vec<usize>,
    pub taus: Vec<f64>,
}

impl DeepArchitecture {
    pub fn new(widths: Vec<usize>, taus: Vec<f64>) -> Result<Self> {
        let arch = Self { widths, taus };
        arch.validate()?;
        Ok(arch)
    }

    /// Single layer `d → 1` with scale `tau`.
    pub fn shallow(d: usize, tau: f64) -> Result<Self> {
        Self::new(vec![d, 1], vec![tau])
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::InvalidConfig("architecture needs at least input and output widths".into()));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("layer widths must be >= 1".into()));
        }
        if *self.widths.last().unwrap() != 1 {
            return Err(Error::InvalidConfig("output width must be 1".into()));
        }
        if self.taus.len() != self.widths.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "expected {} layer scales, got {}",
                self.widths.len() - 1,
                self.taus.len()
            )));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidConfig(format!("layer scale {t} must be > 0")));
        }
        Ok(())
    }

    /// Number of hidden compositions q (layers are indexed 0..=q).
    pub fn depth(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }
}

/// One draw of a Deep-HGP: `layers[i][j]` is the path of unit `j` in layer `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepGpDraw {
    pub layers: Vec<Vec<GpPathRep<f64>>>,
}

impl DeepGpDraw {
    pub fn input_dim(&self) -> usize {
        self.layers[0][0].dim()
    }

    /// Outputs of every layer, each already clipped to [−1, 1].
    pub fn layer_outputs(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for layer in &self.layers {
            let next = layer.iter().map(|p| p.eval(&h).map(clip_psi)).collect::<Result<Vec<_>>>()?;
            outs.push(next.clone());
            h = next;
        }
        Ok(outs)
    }

    /// f(x) = Ψ∘g_q∘⋯∘Ψ∘g_0(x).
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.layer_outputs(x)?.last().expect("at least one layer")[0])
    }
}

/// Draws every unit of every layer independently: lengthscales from
/// Horseshoe(τ_i), then a random-feature path.
pub fn deep_prior_draw(arch: &DeepArchitecture, m: usize, rng: RngStream) -> Result<DeepGpDraw> {
    arch.validate()?;
    let mut r = rng.rng();
    let mut layers = Vec::with_capacity(arch.layers());
    for i in 0..arch.layers() {
        let prior = LengthscalePrior::Horseshoe { tau: arch.taus[i] };
        let units = (0..arch.widths[i + 1])
            .map(|_| hgp_prior_draw_from(&prior, arch.widths[i], m, &mut r).map(|(_, p)| p))
            .collect::<Result<Vec<_>>>()?;
        layers.push(units);
    }
    Ok(DeepGpDraw { layers })
}

/// Gamma(((1 − b)/2) n + 1, b) prior on σ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPrior {
    pub b: f64,
    pub n: usize,
}

impl SigmaPrior {
    pub fn new(b: f64, n: usize) -> Result<Self> {
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidConfig(format!("sigma prior needs b in (0, 1), got {b}")));
        }
        Ok(Self { b, n })
    }

    pub fn shape(&self) -> f64 {
        0.5 * (1.0 - self.b) * self.n as f64 + 1.0
    }

    pub fn rate(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.shape() / self.rate()
    }
}

pub fn sigma2_log_prior(s2: f64, p: &SigmaPrior) -> Result<f64> {
    if !(s2 > 0.0) {
        return Err(Error::DomainError(format!("sigma^2 must be > 0, got {s2}")));
    }
    let (k, b) = (p.shape(), p.rate());
    Ok((k - 1.0) * s2.ln() - b * s2 + k * b.ln() - ln_gamma(k))
}
