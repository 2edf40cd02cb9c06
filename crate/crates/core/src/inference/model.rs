//! The layered random-feature model and its Gibbs-within-MCMC sweep.

use super::chain::{Acceptance, Chain, LatentState};
use super::samplers::{ess_angle, mh_lengthscale_step, sigma2_step, tempered_loglik_unchecked};
use super::{InferenceConfig, RegressionData, SigmaMode};
use crate::error::{Error, Result};
use crate::kernels::FeatureBasis;
use crate::numerics::rng::{RngStream, StreamRng};
use crate::priors::{clip_psi, DeepArchitecture, LengthscalePrior, SigmaPrior};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// First stream id used for feature bases; unit `u` (flattened over layers)
/// draws its basis from stream `BASIS_STREAM + u`.
const BASIS_STREAM: u64 = 1;

/// Everything needed to rebuild the model's fixed parts: widths
/// `d₀, …, d_{q+1}`, one lengthscale prior per layer, feature count and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub widths: Vec<usize>,
    pub priors: Vec<LengthscalePrior>,
    pub m: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.iter().any(|&w| w == 0) || *self.widths.last().unwrap() != 1 {
            return Err(Error::InvalidConfig("widths must be >= 1 with a scalar output".into()));
        }
        if self.priors.len() != self.layers() {
            return Err(Error::InvalidConfig(format!("expected {} layer priors, got {}", self.layers(), self.priors.len())));
        }
        for (i, p) in self.priors.iter().enumerate() {
            p.validate()?;
            if let LengthscalePrior::Deterministic { values } = p {
                if values.len() != self.widths[i] {
                    return Err(Error::DimensionMismatch { expected: self.widths[i], got: values.len() });
                }
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Feature bases, `[layer][unit]`.
    pub fn bases(&self) -> Vec<Vec<FeatureBasis<f64>>> {
        let mut flat = 0;
        (0..self.layers())
            .map(|i| {
                (0..self.widths[i + 1])
                    .map(|_| {
                        let mut r = RngStream::new(self.seed, BASIS_STREAM + flat).rng();
                        flat += 1;
                        FeatureBasis::draw(self.m, self.widths[i], &mut r)
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone)]
struct UnitCache {
    feat: Vec<f64>,
    u: Vec<f64>,
}

struct Unit {
    a: Vec<f64>,
    w: Vec<f64>,
    cache: UnitCache,
}

/// Features and output of one unit at `n` inputs of width `din`.
fn unit_cache(basis: &FeatureBasis<f64>, a: &[f64], w: &[f64], input: &[f64], din: usize, n: usize) -> UnitCache {
    let m = basis.len();
    let scale = basis.scale();
    let wa: Vec<f64> = (0..m).flat_map(|s| basis.omega(s).iter().zip(a).map(|(o, ak)| o * ak).collect::<Vec<_>>()).collect();
    let phases = basis.phases();
    let mut feat = vec![0.0; n * m];
    let mut u = vec![0.0; n];
    for r in 0..n {
        let x = &input[r * din..(r + 1) * din];
        let row = &mut feat[r * m..(r + 1) * m];
        let mut acc = 0.0;
        for s in 0..m {
            let mut ph = phases[s];
            for k in 0..din {
                ph += wa[s * din + k] * x[k];
            }
            let v = scale * ph.cos();
            row[s] = v;
            acc += v * w[s];
        }
        u[r] = acc;
    }
    UnitCache { feat, u }
}

fn matvec_rows(feat: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    let m = v.len();
    (0..n).map(|r| feat[r * m..(r + 1) * m].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Layer outputs recomputed from some layer onwards.
struct Downstream {
    caches: Vec<Vec<UnitCache>>,
    outs: Vec<Vec<f64>>,
}

struct Engine<'a> {
    data: &'a RegressionData,
    spec: &'a ModelSpec,
    bases: Vec<Vec<FeatureBasis<f64>>>,
    units: Vec<Vec<Unit>>,
    /// `outs[i]`: output of layer `i` at the design points, n × d_{i+1}.
    outs: Vec<Vec<f64>>,
    clip: bool,
    rho: f64,
    sigma_sq: f64,
    ll: f64,
}

impl<'a> Engine<'a> {
    fn n(&self) -> usize {
        self.data.len()
    }

    fn act(&self, v: f64) -> f64 {
        if self.clip {
            clip_psi(v)
        } else {
            v
        }
    }

    fn input<'s>(&'s self, layer: usize, outs: &'s [Vec<f64>]) -> &'s [f64] {
        if layer == 0 {
            self.data.x.as_slice()
        } else {
            &outs[layer - 1]
        }
    }

    fn loglik(&self, f: &[f64]) -> f64 {
        tempered_loglik_unchecked(f, &self.data.y, self.sigma_sq, self.rho)
    }

    fn with_column(&self, out: &[f64], width: usize, j: usize, u: &[f64]) -> Vec<f64> {
        let mut o = out.to_vec();
        for (r, &v) in u.iter().enumerate() {
            o[r * width + j] = self.act(v);
        }
        o
    }

    /// Recomputes layers `from..` given the output of layer `from − 1`.
    fn forward_from(&self, from: usize, input: &[f64]) -> Downstream {
        let n = self.n();
        let mut caches = Vec::new();
        let mut outs: Vec<Vec<f64>> = Vec::new();
        for l in from..self.spec.layers() {
            let din = self.spec.widths[l];
            let dout = self.spec.widths[l + 1];
            let inp: &[f64] = if l == from { input } else { outs.last().unwrap() };
            let layer: Vec<UnitCache> =
                self.units[l].iter().zip(&self.bases[l]).map(|(unit, b)| unit_cache(b, &unit.a, &unit.w, inp, din, n)).collect();
            let mut out = vec![0.0; n * dout];
            for (j, c) in layer.iter().enumerate() {
                for r in 0..n {
                    out[r * dout + j] = self.act(c.u[r]);
                }
            }
            caches.push(layer);
            outs.push(out);
        }
        Downstream { caches, outs }
    }

    fn commit(&mut self, layer: usize, out: Vec<f64>, down: Option<Downstream>) {
        self.outs[layer] = out;
        if let Some(d) = down {
            for (off, (caches, out)) in d.caches.into_iter().zip(d.outs).enumerate() {
                let l = layer + 1 + off;
                for (unit, c) in self.units[l].iter_mut().zip(caches) {
                    unit.cache = c;
                }
                self.outs[l] = out;
            }
        }
    }

    /// Log-likelihood after replacing the pre-activation of unit `(i, j)`
    /// by `u`, with the layer output and downstream recomputation.
    fn propose(&self, i: usize, j: usize, u: &[f64]) -> (f64, Vec<f64>, Option<Downstream>) {
        let width = self.spec.widths[i + 1];
        let out = self.with_column(&self.outs[i], width, j, u);
        if i + 1 == self.spec.layers() {
            let ll = self.loglik(&out);
            (ll, out, None)
        } else {
            let down = self.forward_from(i + 1, &out);
            let ll = self.loglik(down.outs.last().unwrap());
            (ll, out, Some(down))
        }
    }

    fn ess_unit(&mut self, i: usize, j: usize, rng: &mut StreamRng, acc: &mut Acceptance) {
        let n = self.n();
        let m = self.spec.m;
        let nu: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let unit = &self.units[i][j];
        let u_nu = matvec_rows(&unit.cache.feat, &nu, n);
        let u0 = unit.cache.u.clone();
        let mut pending: Option<(f64, Vec<f64>, Vec<f64>, Option<Downstream>)> = None;
        let (theta, ll, evals) = ess_angle(
            self.ll,
            |t| {
                let (s, c) = t.sin_cos();
                let u: Vec<f64> = u0.iter().zip(&u_nu).map(|(a, b)| a * c + b * s).collect();
                let (ll, out, down) = self.propose(i, j, &u);
                pending = Some((t, u, out, down));
                ll
            },
            rng,
        );
        acc.ess_steps += 1;
        acc.ess_evals += evals as u64;
        if let Some((t, u, out, down)) = pending {
            if t == theta {
                let (s, c) = t.sin_cos();
                let unit = &mut self.units[i][j];
                for (w, v) in unit.w.iter_mut().zip(&nu) {
                    *w = *w * c + v * s;
                }
                unit.cache.u = u;
                self.commit(i, out, down);
                self.ll = ll;
            }
        }
    }

    fn mh_unit(&mut self, i: usize, j: usize, k: usize, step: f64, rng: &mut StreamRng, acc: &mut Acceptance) {
        let n = self.n();
        let din = self.spec.widths[i];
        let prior = &self.spec.priors[i];
        let mut pending: Option<(f64, UnitCache, Vec<f64>, Option<Downstream>)> = None;
        let a_cur = self.units[i][j].a[k];
        let (a_new, ll, accepted) = mh_lengthscale_step(
            a_cur,
            self.ll,
            prior,
            step,
            |a_prop| {
                let mut a = self.units[i][j].a.clone();
                a[k] = a_prop;
                let input = self.input(i, &self.outs);
                let cache = unit_cache(&self.bases[i][j], &a, &self.units[i][j].w, input, din, n);
                let (ll, out, down) = self.propose(i, j, &cache.u);
                pending = Some((a_prop, cache, out, down));
                ll
            },
            rng,
        );
        acc.mh_proposed += 1;
        if accepted {
            acc.mh_accepted += 1;
        }
        if let Some((a_prop, cache, out, down)) = pending {
            if accepted && a_prop == a_new && a_new != a_cur {
                let unit = &mut self.units[i][j];
                unit.a[k] = a_new;
                unit.cache = cache;
                self.commit(i, out, down);
                self.ll = ll;
            }
        }
    }

    fn residual_ss(&self) -> f64 {
        self.outs.last().unwrap().iter().zip(&self.data.y).map(|(f, y)| (y - f) * (y - f)).sum()
    }

    fn snapshot(&self, iteration: usize) -> LatentState {
        LatentState {
            iteration,
            loglik: self.ll,
            sigma_sq: self.sigma_sq,
            lengthscales: self.units.iter().map(|l| l.iter().map(|u| u.a.clone()).collect()).collect(),
            weights: self.units.iter().map(|l| l.iter().map(|u| u.w.clone()).collect()).collect(),
        }
    }
}

/// Runs the sampler for an arbitrary layered model.
pub fn run_model(data: &RegressionData, spec: &ModelSpec, cfg: &InferenceConfig) -> Result<Chain> {
    cfg.validate()?;
    spec.validate()?;
    if spec.m != cfg.m_features || spec.seed != cfg.seed {
        return Err(Error::InvalidConfig("model spec and config disagree on features or seed".into()));
    }
    if spec.widths[0] != data.dim() {
        return Err(Error::DimensionMismatch { expected: spec.widths[0], got: data.dim() });
    }
    if data.is_empty() {
        return Err(Error::DegenerateInput("no observations".into()));
    }
    let n = data.len();
    let (sigma_sq, rho, sigma_prior) = match cfg.sigma_mode {
        SigmaMode::Known => {
            let s = data.sigma0_sq.ok_or_else(|| Error::InvalidConfig("known-noise mode needs sigma0_sq in the data".into()))?;
            (s, cfg.rho, None)
        }
        SigmaMode::GammaPrior { b } => {
            let mean = data.y.iter().sum::<f64>() / n as f64;
            let var = data.y.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
            // The b-fractional posterior with an Exp(1) prior on s² = bσ² is the
            // standard posterior with the Gamma prior on σ²; we sample the latter.
            (var.max(1e-6), 1.0, Some(SigmaPrior::new(b, n)?))
        }
    };
    let mut rng = RngStream::new(cfg.seed, 0).rng();
    let bases = spec.bases();
    let mut units = Vec::with_capacity(spec.layers());
    for i in 0..spec.layers() {
        let layer = (0..spec.widths[i + 1])
            .map(|_| {
                let a = match &spec.priors[i] {
                    LengthscalePrior::Deterministic { values } => values.clone(),
                    _ => vec![cfg.init_lengthscale; spec.widths[i]],
                };
                let w: Vec<f64> = (0..spec.m).map(|_| rng.sample(StandardNormal)).collect();
                Unit { a, w, cache: UnitCache { feat: Vec::new(), u: Vec::new() } }
            })
            .collect::<Vec<_>>();
        units.push(layer);
    }
    let mut engine =
        Engine { data, spec, bases, units, outs: vec![Vec::new(); spec.layers()], clip: cfg.clip, rho, sigma_sq, ll: 0.0 };
    let init = engine.forward_from(0, data.x.as_slice());
    for (l, (caches, out)) in init.caches.into_iter().zip(init.outs).enumerate() {
        for (unit, c) in engine.units[l].iter_mut().zip(caches) {
            unit.cache = c;
        }
        engine.outs[l] = out;
    }
    engine.ll = engine.loglik(engine.outs.last().unwrap());

    let mut acc = Acceptance::default();
    let mut states = Vec::with_capacity(cfg.retained());
    let mut trace = Vec::with_capacity(cfg.iters);
    for it in 1..=cfg.iters {
        for i in (0..spec.layers()).rev() {
            for j in 0..spec.widths[i + 1] {
                for _ in 0..cfg.ess_sweeps {
                    engine.ess_unit(i, j, &mut rng, &mut acc);
                }
            }
        }
        for i in 0..spec.layers() {
            if spec.priors[i].is_deterministic() {
                continue;
            }
            for j in 0..spec.widths[i + 1] {
                for k in 0..spec.widths[i] {
                    engine.mh_unit(i, j, k, cfg.mh_step, &mut rng, &mut acc);
                }
            }
        }
        if let Some(p) = &sigma_prior {
            engine.sigma_sq = sigma2_step(engine.sigma_sq, engine.residual_ss(), n, p, &mut rng);
            engine.ll = engine.loglik(engine.outs.last().unwrap());
        }
        if !engine.ll.is_finite() {
            return Err(Error::DegenerateInput(format!("log-likelihood became {} at iteration {it}", engine.ll)));
        }
        trace.push(engine.ll);
        if it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            states.push(engine.snapshot(it));
        }
    }
    Chain::new(cfg.clone(), spec.clone(), states, trace, acc)
}

/// Single-layer HGP posterior: one unit with lengthscale prior `prior`.
pub fn run_hgp(data: &RegressionData, prior: &LengthscalePrior, cfg: &InferenceConfig) -> Result<Chain> {
    let spec = ModelSpec { widths: vec![data.dim(), 1], priors: vec![prior.clone()], m: cfg.m_features, seed: cfg.seed };
    run_model(data, &spec, cfg)
}

/// Deep-HGP posterior with horseshoe lengthscale priors per layer.
pub fn run_deep_hgp(data: &RegressionData, arch: &DeepArchitecture, cfg: &InferenceConfig) -> Result<Chain> {
    arch.validate()?;
    if arch.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: arch.input_dim(), got: data.dim() });
    }
    let priors = arch.taus.iter().map(|&tau| LengthscalePrior::Horseshoe { tau }).collect();
    let spec = ModelSpec { widths: arch.widths.clone(), priors, m: cfg.m_features, seed: cfg.seed };
    run_model(data, &spec, cfg)
}
