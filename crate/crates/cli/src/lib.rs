//! Reproducible study runners on top of `deep_hgp`.

pub mod checks;
pub mod config;
pub mod error;
pub mod output;
pub mod study;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};

use output::OutputDir;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DEEP_HGP_OUT";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Output directory: `--out`, then the config's `output_dir`, then
/// `$DEEP_HGP_OUT/<command>`, then `runs/<command>`.
pub fn resolve_output(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    if let Some(p) = out {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(cfg.experiment.name())
}

/// Runs `command` with the given configuration and returns the JSON summary
/// that was written to the output directory.
pub fn run(command: Experiment, mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<serde_json::Value> {
    if command != cfg.experiment {
        return Err(CliError::Config(format!("command {} but config is for {}", command.name(), cfg.experiment.name())));
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let dir = resolve_output(&cfg, opts.out.as_deref());
    cfg.output_dir = Some(dir.clone());
    let out = OutputDir::create(&dir)?;
    let threads = opts.threads.unwrap_or(1);
    let value = match command {
        Experiment::Contraction => serde_json::to_value(study::contraction_study(&cfg, threads, &out)?)?,
        Experiment::Freeze => serde_json::to_value(study::freeze_demo(&cfg, threads, &out)?)?,
        Experiment::HorseshoeCheck => serde_json::to_value(checks::horseshoe_check(&cfg, &out)?)?,
        Experiment::DivergenceCheck => serde_json::to_value(checks::divergence_check(&cfg, &out)?)?,
        Experiment::EquivalenceCheck => serde_json::to_value(checks::equivalence_check(&cfg, &out)?)?,
        Experiment::Concentration => serde_json::to_value(checks::concentration(&cfg, &out)?)?,
        Experiment::PriorSample => serde_json::to_value(checks::prior_sample(&cfg, &out)?)?,
    };
    Ok(value)
}
