//! Stored MCMC output, prediction and on-disk round trip.

use super::model::ModelSpec;
use super::InferenceConfig;
use crate::error::{Error, Result};
use crate::kernels::{DesignPoints, FeatureBasis};
use crate::numerics::linalg::Matrix;
use crate::priors::clip_psi;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::path::Path;

/// One retained state of the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub iteration: usize,
    pub loglik: f64,
    pub sigma_sq: f64,
    /// `[layer][unit][coordinate]`.
    pub lengthscales: Vec<Vec<Vec<f64>>>,
    /// `[layer][unit][feature]`.
    pub weights: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub mh_proposed: u64,
    pub mh_accepted: u64,
    pub ess_steps: u64,
    pub ess_evals: u64,
}

impl Acceptance {
    /// Fraction of accepted lengthscale proposals (1 when none were made).
    pub fn mh_rate(&self) -> f64 {
        if self.mh_proposed == 0 {
            1.0
        } else {
            self.mh_accepted as f64 / self.mh_proposed as f64
        }
    }

    /// Average number of likelihood evaluations per elliptical slice step.
    pub fn ess_evals_per_step(&self) -> f64 {
        if self.ess_steps == 0 {
            0.0
        } else {
            self.ess_evals as f64 / self.ess_steps as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub config: InferenceConfig,
    pub spec: ModelSpec,
    pub states: Vec<LatentState>,
    /// Log-likelihood after every iteration, burn-in included.
    pub loglik_trace: Vec<f64>,
    pub acceptance: Acceptance,
    bases: Vec<Vec<FeatureBasis<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: InferenceConfig,
    spec: ModelSpec,
    acceptance: Acceptance,
    retained: usize,
}

const CHAIN_CSV: &str = "chain.csv";
const WEIGHTS_CSV: &str = "weights.csv";
const TRACE_CSV: &str = "trace.csv";
const SIDECAR_JSON: &str = "chain.json";

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("chain i/o: {e}"))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| io_err(format!("bad number {s:?}: {e}")))
}

impl Chain {
    pub fn new(config: InferenceConfig, spec: ModelSpec, states: Vec<LatentState>, loglik_trace: Vec<f64>, acceptance: Acceptance) -> Result<Self> {
        let bases = spec.bases();
        Ok(Self { config, spec, states, loglik_trace, acceptance, bases })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn bases(&self) -> &[Vec<FeatureBasis<f64>>] {
        &self.bases
    }

    /// Retained draws of lengthscale `k` of unit `j` in layer `i`.
    pub fn lengthscale_draws(&self, i: usize, j: usize, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.lengthscales[i][j][k]).collect()
    }

    pub fn median_lengthscale(&self, i: usize, j: usize, k: usize) -> f64 {
        median(&self.lengthscale_draws(i, j, k))
    }

    pub fn sigma_sq_draws(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.sigma_sq).collect()
    }

    /// Value of the (clipped, when configured) composition of state `s` at `x`.
    pub fn eval_state(&self, s: &LatentState, x: &[f64]) -> Result<f64> {
        if x.len() != self.spec.widths[0] {
            return Err(Error::DimensionMismatch { expected: self.spec.widths[0], got: x.len() });
        }
        let mut h = x.to_vec();
        for (i, layer) in self.bases.iter().enumerate() {
            h = layer
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    let feat = b.features(&h, &s.lengthscales[i][j]);
                    let v: f64 = feat.iter().zip(&s.weights[i][j]).map(|(a, w)| a * w).sum();
                    if self.config.clip {
                        clip_psi(v)
                    } else {
                        v
                    }
                })
                .collect();
        }
        Ok(h[0])
    }

    /// Pointwise posterior mean at `xnew`.
    pub fn posterior_mean(&self, xnew: &DesignPoints<f64>) -> Result<Vec<f64>> {
        let draws = predict(self, xnew)?;
        let r = draws.rows() as f64;
        Ok((0..draws.cols()).map(|c| (0..draws.rows()).map(|i| draws[(i, c)]).sum::<f64>() / r).collect())
    }

    /// Writes `chain.csv`, `weights.csv`, `trace.csv` and the `chain.json`
    /// sidecar into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        let mut header = vec!["iteration".to_string(), "loglik".into(), "sigma_sq".into()];
        let mut wheader = vec!["iteration".to_string()];
        for i in 0..self.spec.layers() {
            for j in 0..self.spec.widths[i + 1] {
                for k in 0..self.spec.widths[i] {
                    header.push(format!("A_l{i}_u{j}_k{k}"));
                }
                for s in 0..self.spec.m {
                    wheader.push(format!("w_l{i}_u{j}_f{s}"));
                }
            }
        }
        let mut cw = csv::Writer::from_path(dir.join(CHAIN_CSV)).map_err(io_err)?;
        let mut ww = csv::Writer::from_path(dir.join(WEIGHTS_CSV)).map_err(io_err)?;
        cw.write_record(&header).map_err(io_err)?;
        ww.write_record(&wheader).map_err(io_err)?;
        for s in &self.states {
            let mut rec = vec![s.iteration.to_string(), s.loglik.to_string(), s.sigma_sq.to_string()];
            rec.extend(s.lengthscales.iter().flatten().flatten().map(f64::to_string));
            cw.write_record(&rec).map_err(io_err)?;
            let mut wrec = vec![s.iteration.to_string()];
            wrec.extend(s.weights.iter().flatten().flatten().map(f64::to_string));
            ww.write_record(&wrec).map_err(io_err)?;
        }
        cw.flush().map_err(io_err)?;
        ww.flush().map_err(io_err)?;
        let mut tw = csv::Writer::from_path(dir.join(TRACE_CSV)).map_err(io_err)?;
        tw.write_record(["iteration", "loglik"]).map_err(io_err)?;
        for (it, ll) in self.loglik_trace.iter().enumerate() {
            tw.write_record([(it + 1).to_string(), ll.to_string()]).map_err(io_err)?;
        }
        tw.flush().map_err(io_err)?;
        let side = Sidecar { config: self.config.clone(), spec: self.spec.clone(), acceptance: self.acceptance, retained: self.len() };
        let f = File::create(dir.join(SIDECAR_JSON)).map_err(io_err)?;
        serde_json::to_writer_pretty(f, &side).map_err(io_err)
    }

    /// Inverse of [`Chain::save`]; feature bases are regenerated from the seed.
    pub fn load(dir: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_reader(File::open(dir.join(SIDECAR_JSON)).map_err(io_err)?).map_err(io_err)?;
        let spec = side.spec;
        let shape = |per_unit: &dyn Fn(usize) -> usize, flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
            let mut pos = 0;
            (0..spec.layers())
                .map(|i| {
                    (0..spec.widths[i + 1])
                        .map(|_| {
                            let len = per_unit(i);
                            let v = flat[pos..pos + len].to_vec();
                            pos += len;
                            v
                        })
                        .collect()
                })
                .collect()
        };
        let mut cr = csv::Reader::from_path(dir.join(CHAIN_CSV)).map_err(io_err)?;
        let mut wr = csv::Reader::from_path(dir.join(WEIGHTS_CSV)).map_err(io_err)?;
        let mut states = Vec::with_capacity(side.retained);
        for (rec, wrec) in cr.records().zip(wr.records()) {
            let (rec, wrec) = (rec.map_err(io_err)?, wrec.map_err(io_err)?);
            let vals = rec.iter().skip(1).map(parse_f64).collect::<Result<Vec<_>>>()?;
            let ws = wrec.iter().skip(1).map(parse_f64).collect::<Result<Vec<_>>>()?;
            let expected_a: usize = (0..spec.layers()).map(|i| spec.widths[i] * spec.widths[i + 1]).sum();
            if vals.len() != 2 + expected_a {
                return Err(Error::DimensionMismatch { expected: 2 + expected_a, got: vals.len() });
            }
            let iteration = rec[0].parse::<usize>().map_err(io_err)?;
            states.push(LatentState {
                iteration,
                loglik: vals[0],
                sigma_sq: vals[1],
                lengthscales: shape(&|i| spec.widths[i], &vals[2..]),
                weights: shape(&|_| spec.m, &ws),
            });
        }
        if states.len() != side.retained {
            return Err(Error::DimensionMismatch { expected: side.retained, got: states.len() });
        }
        let mut tr = csv::Reader::from_path(dir.join(TRACE_CSV)).map_err(io_err)?;
        let trace = tr
            .records()
            .map(|r| r.map_err(io_err).and_then(|r| parse_f64(&r[1])))
            .collect::<Result<Vec<_>>>()?;
        Chain::new(side.config, spec, states, trace, side.acceptance)
    }
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Posterior draws of `f` at `xnew`: row `r` is retained state `r`.
pub fn predict(chain: &Chain, xnew: &DesignPoints<f64>) -> Result<Matrix<f64>> {
    if xnew.dim() != chain.spec.widths[0] {
        return Err(Error::DimensionMismatch { expected: chain.spec.widths[0], got: xnew.dim() });
    }
    if chain.is_empty() {
        return Err(Error::DegenerateInput("empty chain".into()));
    }
    let mut out = Matrix::zeros(chain.len(), xnew.len());
    for (r, s) in chain.states.iter().enumerate() {
        for (c, x) in xnew.iter().enumerate() {
            out[(r, c)] = chain.eval_state(s, x)?;
        }
    }
    Ok(out)
}
