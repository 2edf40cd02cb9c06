//! Posterior studies: contraction rates and freezing of paths.

use crate::config::{ExperimentConfig, Model};
use crate::error::{CliError, Result};
use crate::output::svg::{self, Axes, Series};
use crate::output::{fmt, OutputDir};
use deep_hgp::analysis::{digest, fit_rate, RateFit};
use deep_hgp::analysis::Estimate;
use deep_hgp::inference::{run_deep_hgp, run_hgp, Chain, RegressionData};
use deep_hgp::kernels::DesignPoints;
use deep_hgp::truth::{eval_truth, target_rate, TruthFunction};
use deep_hgp::RngStream;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

/// Ratio below which a coordinate counts as frozen.
pub const FREEZE_RATIO: f64 = 0.1;

const DATA_STREAM: u64 = 1;
const CHAIN_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

#[derive(Debug, Clone, Serialize)]
pub struct LengthscaleSummary {
    pub layer: usize,
    pub unit: usize,
    pub coord: usize,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRecord {
    pub n: usize,
    pub replication: usize,
    pub chain_seed: u64,
    pub loss: Estimate,
    pub runtime_s: f64,
    pub mh_accept_rate: f64,
    pub ess_evals_per_step: f64,
    pub chain_digest: String,
    pub lengthscales: Vec<LengthscaleSummary>,
    /// Largest inactive median over smallest active median (single-layer
    /// model with a variable-selection truth only).
    pub freeze_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub records: Vec<StudyRecord>,
    pub median_losses: Vec<(usize, f64)>,
    pub fit: Option<RateFit>,
    pub target_slope: Option<f64>,
    /// Per n: replications whose freeze ratio is at most `FREEZE_RATIO`.
    pub frozen_counts: Vec<(usize, usize)>,
}

impl StudyResult {
    pub fn frozen_count(&self, n: usize) -> Option<usize> {
        self.frozen_counts.iter().find(|(m, _)| *m == n).map(|(_, c)| *c)
    }
}

fn task_key(n: usize, rep: usize) -> u64 {
    ((n as u64) << 20) | rep as u64
}

pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Simulated data set for sample size `n`, replication `rep`. Designs are
/// nested: the data for `n` are the first `n` points of every larger size.
pub fn simulate(cfg: &ExperimentConfig, f0: &TruthFunction, n: usize, rep: usize) -> Result<RegressionData> {
    let d = f0.dim();
    let mut rng = RngStream::new(cfg.seed, DATA_STREAM).child(rep as u64).rng();
    let mut xs = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let e: f64 = StandardNormal.sample(&mut rng);
        y.push(eval_truth(f0, &p)? + cfg.data.sigma0 * e);
        xs.extend(p);
    }
    Ok(RegressionData::new(DesignPoints::new(d, xs)?, y, Some(cfg.data.sigma0 * cfg.data.sigma0))?)
}

fn eval_points(cfg: &ExperimentConfig, d: usize) -> DesignPoints<f64> {
    DesignPoints::uniform(cfg.data.eval_points, d, &mut RngStream::new(cfg.seed, EVAL_STREAM).rng())
}

fn run_chain(cfg: &ExperimentConfig, f0: &TruthFunction, n: usize, rep: usize) -> Result<(Chain, u64, f64)> {
    let data = simulate(cfg, f0, n, rep)?;
    let mut icfg = cfg.inference.clone();
    icfg.seed = RngStream::new(cfg.seed, CHAIN_STREAM).child(task_key(n, rep)).rng().next_u64();
    let prior = cfg.prior.as_ref().ok_or_else(|| CliError::Config("a [prior] section is required".into()))?;
    let start = Instant::now();
    let chain = match prior.model(n, f0.dim())? {
        Model::Hgp(p) => run_hgp(&data, &p, &icfg)?,
        Model::Deep(arch) => run_deep_hgp(&data, &arch, &icfg)?,
    };
    Ok((chain, icfg.seed, start.elapsed().as_secs_f64()))
}

fn summarize(chain: &Chain) -> Vec<LengthscaleSummary> {
    let mut out = Vec::new();
    for (i, layer) in chain.states[0].lengthscales.iter().enumerate() {
        for (j, unit) in layer.iter().enumerate() {
            for k in 0..unit.len() {
                let mut v = chain.lengthscale_draws(i, j, k);
                v.sort_by(f64::total_cmp);
                out.push(LengthscaleSummary {
                    layer: i,
                    unit: j,
                    coord: k,
                    median: quantile(&v, 0.5),
                    q10: quantile(&v, 0.1),
                    q90: quantile(&v, 0.9),
                });
            }
        }
    }
    out
}

fn freeze_ratio(f0: &TruthFunction, chain: &Chain, sums: &[LengthscaleSummary]) -> Option<f64> {
    let active = f0.active_set()?;
    if chain.spec.layers() != 1 || active.len() == f0.dim() {
        return None;
    }
    let (mut act, mut inact) = (f64::INFINITY, 0.0f64);
    for s in sums {
        if active.contains(&s.coord) {
            act = act.min(s.median);
        } else {
            inact = inact.max(s.median);
        }
    }
    Some(inact / act)
}

fn record(cfg: &ExperimentConfig, f0: &TruthFunction, eval: &DesignPoints<f64>, n: usize, rep: usize) -> Result<(StudyRecord, Chain)> {
    let (chain, chain_seed, runtime_s) = run_chain(cfg, f0, n, rep)?;
    let fhat = chain.posterior_mean(eval)?;
    let gaps = eval.iter().zip(&fhat).map(|(x, f)| Ok((f - eval_truth(f0, x)?).powi(2))).collect::<Result<Vec<f64>>>()?;
    let lengthscales = summarize(&chain);
    let all: Vec<&Vec<Vec<Vec<f64>>>> = chain.states.iter().map(|s| &s.lengthscales).collect();
    let rec = StudyRecord {
        n,
        replication: rep,
        chain_seed,
        loss: Estimate::from_samples(&gaps),
        runtime_s,
        mh_accept_rate: chain.acceptance.mh_rate(),
        ess_evals_per_step: chain.acceptance.ess_evals_per_step(),
        chain_digest: digest(&(all, &chain.loglik_trace))?,
        freeze_ratio: freeze_ratio(f0, &chain, &lengthscales),
        lengthscales,
    };
    Ok((rec, chain))
}

/// Runs every (n, replication) task on `threads` workers, keeping the
/// results in (n, replication) order.
fn run_all<T: Send>(
    cfg: &ExperimentConfig,
    threads: usize,
    job: impl Fn(usize, usize) -> Result<T> + Sync,
) -> Result<Vec<Result<T>>> {
    let tasks: Vec<(usize, usize)> = cfg.ns.iter().flat_map(|&n| (0..cfg.replications).map(move |r| (n, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().map_err(|e| CliError::Output(e.to_string()))?;
    Ok(pool.install(|| tasks.par_iter().map(|&(n, r)| job(n, r)).collect()))
}

fn split<T>(results: Vec<Result<T>>) -> (Vec<T>, Option<CliError>) {
    let mut ok = Vec::new();
    let mut err = None;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    }
    (ok, err)
}

/// Slope of the squared-loss target rate between the smallest and largest n.
pub fn target_slope(f0: &TruthFunction, ns: &[usize]) -> Option<f64> {
    match f0 {
        TruthFunction::VarSelect { active, beta, .. } => Some(-2.0 * beta / (2.0 * beta + active.len() as f64)),
        TruthFunction::Composition { structure, .. } if ns.len() > 1 => {
            let (a, b) = (ns[0], *ns.last().unwrap());
            let r = |n| target_rate(structure, n).ln();
            Some(2.0 * (r(b) - r(a)) / ((b as f64).ln() - (a as f64).ln()))
        }
        _ => None,
    }
}

fn write_records(out: &OutputDir, records: &[StudyRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.replication.to_string(),
                r.chain_seed.to_string(),
                fmt(r.loss.value),
                fmt(r.loss.se),
                r.freeze_ratio.map(fmt).unwrap_or_default(),
                fmt(r.mh_accept_rate),
                fmt(r.ess_evals_per_step),
                r.chain_digest.clone(),
            ]
        })
        .collect();
    out.write_csv(
        "records.csv",
        &["n", "replication", "chain_seed", "loss", "loss_se", "freeze_ratio", "mh_accept_rate", "ess_evals_per_step", "chain_digest"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .flat_map(|r| {
            r.lengthscales.iter().map(move |s| {
                vec![
                    r.n.to_string(),
                    r.replication.to_string(),
                    s.layer.to_string(),
                    s.unit.to_string(),
                    s.coord.to_string(),
                    fmt(s.median),
                    fmt(s.q10),
                    fmt(s.q90),
                ]
            })
        })
        .collect();
    out.write_csv("lengthscales.csv", &["n", "replication", "layer", "unit", "coord", "median", "q10", "q90"], &rows)?;
    let rows: Vec<Vec<String>> =
        records.iter().map(|r| vec![r.n.to_string(), r.replication.to_string(), format!("{:.3}", r.runtime_s)]).collect();
    out.write_csv("timing.csv", &["n", "replication", "runtime_s"], &rows)
}

fn aggregate(cfg: &ExperimentConfig, f0: &TruthFunction, records: Vec<StudyRecord>) -> Result<StudyResult> {
    let mut median_losses = Vec::new();
    let mut frozen_counts = Vec::new();
    for &n in &cfg.ns {
        let losses: Vec<f64> = records.iter().filter(|r| r.n == n).map(|r| r.loss.value).collect();
        if !losses.is_empty() {
            median_losses.push((n, median(&losses)));
        }
        let frozen = records.iter().filter(|r| r.n == n && r.freeze_ratio.is_some_and(|q| q <= FREEZE_RATIO)).count();
        frozen_counts.push((n, frozen));
    }
    let fit = if median_losses.len() >= 3 {
        let ns: Vec<f64> = median_losses.iter().map(|p| p.0 as f64).collect();
        let ls: Vec<f64> = median_losses.iter().map(|p| p.1).collect();
        Some(fit_rate(&ns, &ls)?)
    } else {
        None
    };
    Ok(StudyResult { records, median_losses, fit, target_slope: target_slope(f0, &cfg.ns), frozen_counts })
}

/// Posterior-mean L²(μ) loss over the sample sizes and replications, with a
/// log-log rate fit of the median loss.
pub fn contraction_study(cfg: &ExperimentConfig, threads: usize, out: &OutputDir) -> Result<StudyResult> {
    let f0 = cfg.truth.as_ref().ok_or_else(|| CliError::Config("a [truth] section is required".into()))?.build()?;
    let eval = eval_points(cfg, f0.dim());
    let results = run_all(cfg, threads, |n, r| record(cfg, &f0, &eval, n, r).map(|p| p.0))?;
    let (records, err) = split(results);
    write_records(out, &records)?;
    if let Some(e) = err {
        return Err(e);
    }
    let result = aggregate(cfg, &f0, records)?;
    out.write_json("summary.json", &Summary::from(&result))?;
    let mut series: Vec<Series> = Vec::new();
    for r in 0..cfg.replications {
        let pts = result.records.iter().filter(|x| x.replication == r).map(|x| (x.n as f64, x.loss.value)).collect();
        series.push(Series { name: format!("replication {r}"), points: pts });
    }
    series.push(Series { name: "median".into(), points: result.median_losses.iter().map(|p| (p.0 as f64, p.1)).collect() });
    let axes = Axes { log_x: true, log_y: true };
    out.write_text("loss_vs_n.svg", &svg::line_plot("posterior-mean L2 loss", "n", "loss", &series, axes))?;
    out.finish(cfg)?;
    Ok(result)
}

#[derive(Serialize)]
struct Summary<'a> {
    median_losses: &'a [(usize, f64)],
    fit: &'a Option<RateFit>,
    target_slope: Option<f64>,
    freeze_threshold: f64,
    frozen_counts: &'a [(usize, usize)],
}

impl<'a> From<&'a StudyResult> for Summary<'a> {
    fn from(r: &'a StudyResult) -> Self {
        Summary {
            median_losses: &r.median_losses,
            fit: &r.fit,
            target_slope: r.target_slope,
            freeze_threshold: FREEZE_RATIO,
            frozen_counts: &r.frozen_counts,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Slice {
    pub n: usize,
    pub replication: usize,
    pub coord: usize,
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
}

impl Slice {
    pub fn range(&self) -> f64 {
        let (lo, hi) = self.mean.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FreezeResult {
    pub study: StudyResult,
    pub slices: Vec<Slice>,
    /// Per record: largest inactive slice range over smallest active one.
    pub slice_ratios: Vec<Option<f64>>,
}

/// Posterior lengthscale summaries and predictive slices through the centre
/// of the cube along every coordinate.
pub fn freeze_demo(cfg: &ExperimentConfig, threads: usize, out: &OutputDir) -> Result<FreezeResult> {
    let f0 = cfg.truth.as_ref().ok_or_else(|| CliError::Config("a [truth] section is required".into()))?.build()?;
    let d = f0.dim();
    let active = f0.active_set().ok_or_else(|| CliError::Config("freeze needs a variable-selection truth".into()))?.to_vec();
    let eval = eval_points(cfg, d);
    let k = cfg.data.slice_points;
    let t: Vec<f64> = (0..k).map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64).collect();
    let results = run_all(cfg, threads, |n, r| {
        let (rec, chain) = record(cfg, &f0, &eval, n, r)?;
        let mut slices = Vec::with_capacity(d);
        let mut hist = Vec::with_capacity(d);
        for coord in 0..d {
            let mut pts = vec![0.0; k * d];
            for (i, &v) in t.iter().enumerate() {
                pts[i * d + coord] = v;
            }
            let mean = chain.posterior_mean(&DesignPoints::new(d, pts)?)?;
            slices.push(Slice { n, replication: r, coord, t: t.clone(), mean });
            if chain.spec.layers() == 1 {
                let draws = chain.lengthscale_draws(0, 0, coord).iter().map(|a| (a.max(1e-300).log10(), 0.0)).collect();
                hist.push(Series { name: format!("coordinate {coord}"), points: draws });
            }
        }
        Ok((rec, slices, hist))
    })?;
    let (done, err) = split(results);
    let mut records = Vec::new();
    let mut slices = Vec::new();
    let mut slice_ratios = Vec::new();
    for (rec, sl, hist) in done {
        let act = sl.iter().filter(|s| active.contains(&s.coord)).map(Slice::range).fold(f64::INFINITY, f64::min);
        let inact = sl.iter().filter(|s| !active.contains(&s.coord)).map(Slice::range).fold(f64::NEG_INFINITY, f64::max);
        slice_ratios.push((inact.is_finite() && act.is_finite()).then(|| inact / act));
        if !hist.is_empty() {
            let name = format!("lengthscales_n{}_r{}.svg", rec.n, rec.replication);
            out.write_text(&name, &svg::histogram("posterior log10 lengthscale draws", "log10 A", &hist, 40))?;
        }
        let series: Vec<Series> =
            sl.iter().map(|s| Series { name: format!("coordinate {}", s.coord), points: s.t.iter().cloned().zip(s.mean.iter().cloned()).collect() }).collect();
        let name = format!("slices_n{}_r{}.svg", rec.n, rec.replication);
        out.write_text(&name, &svg::line_plot("posterior mean along each axis", "x_k (others 0)", "mean", &series, Axes { log_x: false, log_y: false }))?;
        records.push(rec);
        slices.extend(sl);
    }
    write_records(out, &records)?;
    let rows: Vec<Vec<String>> = slices
        .iter()
        .flat_map(|s| {
            s.t.iter().zip(&s.mean).map(move |(t, m)| vec![s.n.to_string(), s.replication.to_string(), s.coord.to_string(), fmt(*t), fmt(*m)])
        })
        .collect();
    out.write_csv("slices.csv", &["n", "replication", "coord", "t", "mean"], &rows)?;
    if let Some(e) = err {
        return Err(e);
    }
    let study = aggregate(cfg, &f0, records)?;
    #[derive(Serialize)]
    struct FreezeSummary<'a> {
        #[serde(flatten)]
        study: Summary<'a>,
        active: &'a [usize],
        slice_ratios: &'a [Option<f64>],
    }
    out.write_json("summary.json", &FreezeSummary { study: Summary::from(&study), active: &active, slice_ratios: &slice_ratios })?;
    out.finish(cfg)?;
    Ok(FreezeResult { study, slices, slice_ratios })
}
