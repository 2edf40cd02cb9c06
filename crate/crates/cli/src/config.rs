//! Experiment configuration files (TOML).

use crate::error::{CliError, Result};
use deep_hgp::inference::InferenceConfig;
use deep_hgp::priors::{freeze_scales, DeepArchitecture, LengthscalePrior};
use deep_hgp::truth::{cos_varselect, TruthFunction};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MAX_N: usize = 2000;
pub const MAX_GRID: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Contraction,
    Freeze,
    HorseshoeCheck,
    DivergenceCheck,
    EquivalenceCheck,
    Concentration,
    PriorSample,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Contraction => "contraction",
            Experiment::Freeze => "freeze",
            Experiment::HorseshoeCheck => "horseshoe-check",
            Experiment::DivergenceCheck => "divergence-check",
            Experiment::EquivalenceCheck => "equivalence-check",
            Experiment::Concentration => "concentration",
            Experiment::PriorSample => "prior-sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthConfig {
    /// g(x_S) = scale·∏ cos(π·freq·x_k + phase) over the active coordinates.
    CosVarSelect {
        d: usize,
        active: Vec<usize>,
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default = "one")]
        scale: f64,
        beta: f64,
    },
    Custom { function: TruthFunction },
}

fn one() -> f64 {
    1.0
}

impl TruthConfig {
    pub fn build(&self) -> Result<TruthFunction> {
        let f = match self {
            TruthConfig::CosVarSelect { d, active, freq, phase, scale, beta } => {
                cos_varselect(*d, active.clone(), *freq, *phase, *scale, *beta)?
            }
            TruthConfig::Custom { function } => {
                function.validate()?;
                function.clone()
            }
        };
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    Horseshoe { tau: f64 },
    /// Horseshoe with τ = (n^{1+δ}d⁴)^{−1/2}.
    HorseshoeScaled { delta: f64 },
    Exponential { lambda: f64 },
    Deterministic { values: Vec<f64> },
    /// Oracle freezing scales for smoothness `beta` and the given active set.
    Freeze { beta: f64, active: Vec<usize> },
    Deep { widths: Vec<usize>, taus: Vec<f64> },
}

/// Model used for one sample size.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Hgp(LengthscalePrior),
    Deep(DeepArchitecture),
}

impl PriorConfig {
    pub fn model(&self, n: usize, d: usize) -> Result<Model> {
        let hgp = |p: LengthscalePrior| -> Result<Model> {
            p.validate()?;
            Ok(Model::Hgp(p))
        };
        match self {
            PriorConfig::Horseshoe { tau } => hgp(LengthscalePrior::Horseshoe { tau: *tau }),
            PriorConfig::HorseshoeScaled { delta } => {
                let tau = ((n as f64).powf(1.0 + delta) * (d as f64).powi(4)).powf(-0.5);
                hgp(LengthscalePrior::Horseshoe { tau })
            }
            PriorConfig::Exponential { lambda } => hgp(LengthscalePrior::Exponential { lambda: *lambda }),
            PriorConfig::Deterministic { values } => {
                if values.len() != d {
                    return Err(CliError::Config(format!("deterministic prior has {} values for d = {d}", values.len())));
                }
                hgp(LengthscalePrior::Deterministic { values: values.clone() })
            }
            PriorConfig::Freeze { beta, active } => {
                let a = freeze_scales(n, *beta, active, d)?;
                hgp(LengthscalePrior::Deterministic { values: a.as_slice().to_vec() })
            }
            PriorConfig::Deep { widths, taus } => {
                let arch = DeepArchitecture::new(widths.clone(), taus.clone())?;
                if arch.input_dim() != d {
                    return Err(CliError::Config(format!("architecture input width {} but d = {d}", arch.input_dim())));
                }
                Ok(Model::Deep(arch))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Noise standard deviation of the simulated responses.
    pub sigma0: f64,
    /// Monte Carlo points for the L²(μ) loss.
    pub eval_points: usize,
    /// Points per axis in predictive slices.
    pub slice_points: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { sigma0: 0.5, eval_points: 2000, slice_points: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorseshoeCheckConfig {
    pub taus: Vec<f64>,
    pub grid_points: usize,
    /// Grid range [lo, hi] in units of τ.
    pub grid_range: (f64, f64),
}

impl Default for HorseshoeCheckConfig {
    fn default() -> Self {
        Self { taus: vec![1e-3, 0.1, 1.0], grid_points: 200, grid_range: (1e-4, 50.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergenceCheckConfig {
    /// Polynomial pairs checked against brute-force quadrature.
    pub formula_cases: usize,
    /// Random bounded pairs for the Rényi sandwich.
    pub renyi_pairs: usize,
    /// Constant-shift perturbations for the sup-ball inclusion.
    pub shift_cases: usize,
    pub tolerance: f64,
}

impl Default for DivergenceCheckConfig {
    fn default() -> Self {
        Self { formula_cases: 3, renyi_pairs: 50, shift_cases: 20, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceCheckConfig {
    pub cases: usize,
    pub max_n: usize,
    pub bs: Vec<f64>,
    pub tolerance: f64,
}

impl Default for EquivalenceCheckConfig {
    fn default() -> Self {
        Self { cases: 10, max_n: 20, bs: vec![0.3, 0.5, 0.7], tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub d: usize,
    pub scales: Vec<f64>,
    pub eps: f64,
    /// Grid points per axis for the sup-norm.
    pub grid: usize,
    pub draws: usize,
    pub min_r2: f64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self { d: 1, scales: vec![1.0, 2.0, 4.0], eps: 0.5, grid: 64, draws: 200_000, min_r2: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSampleConfig {
    pub draws: usize,
    /// Grid points per axis.
    pub grid: usize,
    pub m_features: usize,
}

impl Default for PriorSampleConfig {
    fn default() -> Self {
        Self { draws: 3, grid: 201, m_features: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ns: Vec<usize>,
    #[serde(default = "one_usize")]
    pub replications: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub truth: Option<TruthConfig>,
    #[serde(default)]
    pub prior: Option<PriorConfig>,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub horseshoe: HorseshoeCheckConfig,
    #[serde(default)]
    pub divergence: DivergenceCheckConfig,
    #[serde(default)]
    pub equivalence: EquivalenceCheckConfig,
    #[serde(default)]
    pub concentration: ConcentrationConfig,
    #[serde(default)]
    pub prior_sample: PriorSampleConfig,
}

fn one_usize() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("ns must be strictly increasing, got {:?}", self.ns));
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n == 0 || n > MAX_N) {
            return bad(format!("sample size {n} outside 1..={MAX_N}"));
        }
        if !(self.data.sigma0 > 0.0 && self.data.sigma0.is_finite()) {
            return bad(format!("data.sigma0 must be > 0, got {}", self.data.sigma0));
        }
        if self.data.eval_points < 2 || self.data.slice_points < 2 {
            return bad("data.eval_points and data.slice_points must be >= 2".into());
        }
        let grids = [
            ("horseshoe.grid_points", self.horseshoe.grid_points),
            ("concentration.grid", self.concentration.grid.pow(self.concentration.d as u32)),
            ("prior_sample.grid", self.prior_sample.grid),
            ("data.slice_points", self.data.slice_points),
        ];
        for (name, g) in grids {
            if g > MAX_GRID {
                return bad(format!("{name} gives {g} grid points, above the limit {MAX_GRID}"));
            }
        }
        if self.equivalence.max_n > MAX_N {
            return bad(format!("equivalence.max_n above the limit {MAX_N}"));
        }
        self.inference.validate()?;
        match self.experiment {
            Experiment::Contraction | Experiment::Freeze => {
                if self.ns.is_empty() {
                    return bad("ns must list at least one sample size".into());
                }
                let truth = self.truth.as_ref().ok_or_else(|| CliError::Config("a [truth] section is required".into()))?;
                let f = truth.build()?;
                match (&f, self.experiment) {
                    (TruthFunction::VarSelect { .. }, _) | (TruthFunction::Composition { .. }, Experiment::Contraction) => {}
                    _ => return bad(format!("{} needs a variable-selection truth", self.experiment.name())),
                }
                let prior = self.prior.as_ref().ok_or_else(|| CliError::Config("a [prior] section is required".into()))?;
                prior.model(self.ns[0], f.dim())?;
            }
            Experiment::PriorSample => {
                let prior = self.prior.as_ref().ok_or_else(|| CliError::Config("a [prior] section is required".into()))?;
                if let PriorConfig::Deep { widths, .. } = prior {
                    let per = self.prior_sample.grid.pow(widths[0] as u32);
                    if per > MAX_GRID {
                        return bad(format!("prior_sample.grid gives {per} points, above the limit {MAX_GRID}"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONTRACTION: &str = r#"
experiment = "contraction"
seed = 7
ns = [50, 100]
replications = 2

[truth]
kind = "cos_var_select"
d = 3
active = [0]
beta = 2.0

[prior]
kind = "horseshoe"
tau = 1.0

[inference]
rho = 0.5
iters = 200
burn_in = 100
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(CONTRACTION).unwrap();
        assert_eq!(cfg.experiment, Experiment::Contraction);
        assert_eq!(cfg.inference.thin, 5);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            CONTRACTION.replace("ns = [50, 100]", "ns = [100, 50]"),
            CONTRACTION.replace("replications = 2", "replications = 0"),
            CONTRACTION.replace("ns = [50, 100]", "ns = [50, 5000]"),
            CONTRACTION.replace("experiment = \"contraction\"", "experiment = \"nope\""),
            CONTRACTION.replace("burn_in = 100", "burn_in = 300"),
            CONTRACTION.replace("tau = 1.0", "tau = -1.0"),
            CONTRACTION.replace("active = [0]", "active = [5]"),
            format!("{CONTRACTION}\n[horseshoe]\ngrid_points = 5000\n"),
        ];
        for text in cases {
            assert!(matches!(ExperimentConfig::from_toml(&text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn scaled_horseshoe_tau() {
        let p = PriorConfig::HorseshoeScaled { delta: 0.0 };
        match p.model(100, 2).unwrap() {
            Model::Hgp(LengthscalePrior::Horseshoe { tau }) => assert!((tau - 1.0 / 40.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }
}
