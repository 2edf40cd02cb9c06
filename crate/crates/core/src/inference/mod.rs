//! Posterior sampling for HGP and Deep-HGP regression.

mod chain;
mod model;
mod samplers;

pub use chain::{predict, Acceptance, Chain, LatentState};
pub use model::{run_deep_hgp, run_hgp, run_model, ModelSpec};
pub use samplers::{
    ess_angle, ess_step, mh_lengthscale_step, sigma2_log_conditional, sigma2_step, slice_sample, tempered_loglik,
};

use crate::error::{Error, Result};
use crate::kernels::DesignPoints;
use serde::{Deserialize, Serialize};

/// Observations `Y_i = f₀(X_i) + ε_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionData {
    pub x: DesignPoints<f64>,
    pub y: Vec<f64>,
    /// Known noise variance; `None` when σ² is inferred.
    pub sigma0_sq: Option<f64>,
}

impl RegressionData {
    pub fn new(x: DesignPoints<f64>, y: Vec<f64>, sigma0_sq: Option<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(format!("response {bad} is not finite")));
        }
        if let Some(s) = sigma0_sq {
            if !(s > 0.0) {
                return Err(Error::DomainError(format!("noise variance must be > 0, got {s}")));
            }
        }
        Ok(Self { x, y, sigma0_sq })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}

/// How the noise variance is handled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaMode {
    /// Fixed at the data's `sigma0_sq`.
    #[default]
    Known,
    /// Gamma(((1 − b)/2)n + 1, b) prior on σ².
    GammaPrior { b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub rho: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Standard deviation of the log-scale random walk on lengthscales.
    pub mh_step: f64,
    pub m_features: usize,
    /// Elliptical-slice updates of each unit's weights per iteration.
    pub ess_sweeps: usize,
    pub seed: u64,
    pub sigma_mode: SigmaMode,
    /// Apply Ψ between layers and at the output.
    pub clip: bool,
    /// Starting value of every non-deterministic lengthscale.
    pub init_lengthscale: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            iters: 2000,
            burn_in: 1000,
            thin: 5,
            mh_step: 0.3,
            m_features: crate::kernels::DEFAULT_FEATURES,
            ess_sweeps: 1,
            seed: 0,
            sigma_mode: SigmaMode::Known,
            clip: true,
            init_lengthscale: 1.0,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad(format!("rho must lie in (0, 1], got {}", self.rho));
        }
        if self.burn_in >= self.iters {
            return bad(format!("burn_in ({}) must be < iters ({})", self.burn_in, self.iters));
        }
        if self.thin == 0 || self.m_features == 0 || self.ess_sweeps == 0 {
            return bad("thin, m_features and ess_sweeps must be >= 1".into());
        }
        if !(self.mh_step >= 0.0 && self.mh_step.is_finite()) {
            return bad(format!("mh_step must be finite and >= 0, got {}", self.mh_step));
        }
        if !(self.init_lengthscale > 0.0 && self.init_lengthscale.is_finite()) {
            return bad(format!("init_lengthscale must be > 0, got {}", self.init_lengthscale));
        }
        if let SigmaMode::GammaPrior { b } = self.sigma_mode {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("sigma prior b must lie in (0, 1), got {b}"));
            }
            if (self.rho - b).abs() > 1e-12 {
                return bad(format!("with a Gamma prior on sigma^2, rho ({}) must equal b ({b})", self.rho));
            }
        }
        Ok(())
    }

    /// Number of retained states.
    pub fn retained(&self) -> usize {
        (self.iters - self.burn_in) / self.thin
    }
}
