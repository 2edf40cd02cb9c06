//! Deterministic diagnostic commands: horseshoe bounds, divergence formulas,
//! posterior equivalence, small-ball concentration and prior path samples.

use crate::config::{ExperimentConfig, Model};
use crate::error::{CliError, Result};
use crate::output::svg::{self, Axes, Series};
use crate::output::{fmt, OutputDir};
use deep_hgp::analysis::*;
use deep_hgp::kernels::{DesignPoints, Lengthscales};
use deep_hgp::numerics::quad::quad_1d;
use deep_hgp::priors::*;
use deep_hgp::RngStream;
use rand::Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Multiplicative slack allowed on exact inequalities.
pub const ARITH_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub bound: &'static str,
    pub tau: f64,
    pub param: f64,
    pub mass: f64,
    pub bound_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HorseshoeReport {
    pub grid_points: usize,
    pub sandwich_failures: usize,
    pub bounds: Vec<BoundRow>,
    pub pass: bool,
}

pub fn horseshoe_check(cfg: &ExperimentConfig, out: &OutputDir) -> Result<HorseshoeReport> {
    let h = &cfg.horseshoe;
    if h.grid_points < 2 || !(h.grid_range.0 > 0.0 && h.grid_range.1 > h.grid_range.0) {
        return Err(CliError::Config("horseshoe grid needs >= 2 points and 0 < lo < hi".into()));
    }
    let mut rows = Vec::new();
    let mut failures = 0;
    let mut series = Vec::new();
    for &tau in &h.taus {
        if !(tau > 0.0) {
            return Err(CliError::Config(format!("tau must be > 0, got {tau}")));
        }
        let (lo, hi) = (h.grid_range.0.ln(), h.grid_range.1.ln());
        let mut pts = Vec::new();
        for i in 0..h.grid_points {
            let t = tau * (lo + (hi - lo) * i as f64 / (h.grid_points - 1) as f64).exp();
            let dens = horseshoe_density(t, tau)?;
            let (l, u) = horseshoe_density_bounds(t, tau);
            let ok = l < dens * (1.0 + ARITH_SLACK) && dens < u * (1.0 + ARITH_SLACK);
            failures += usize::from(!ok);
            rows.push(vec![fmt(tau), fmt(t), fmt(dens), fmt(l), fmt(u), ok.to_string()]);
            pts.push((t / tau, dens / u));
        }
        series.push(Series { name: format!("tau = {tau}"), points: pts });
    }
    out.write_csv("density.csv", &["tau", "t", "density", "lower", "upper", "pass"], &rows)?;
    let axes = Axes { log_x: true, log_y: false };
    out.write_text("density_ratio.svg", &svg::line_plot("horseshoe density / upper bound", "t / tau", "ratio", &series, axes))?;

    let e0 = 2.0 * 5f64.ln() / (2.0 * PI).powf(1.5);
    let c = (2.0 * PI.powi(3)).sqrt();
    let mut bounds = Vec::new();
    for &tau in &h.taus {
        for f in [0.1, 0.5, 1.0] {
            let delta = f * tau;
            let mass = horseshoe_cdf(delta, tau)?;
            let b = e0 * delta / tau;
            bounds.push(BoundRow { bound: "small_delta", tau, param: delta, mass, bound_value: b, pass: mass >= b });
        }
        for f in [1.0, 10.0, 100.0] {
            let delta = f * tau;
            let mass = horseshoe_cdf(delta, tau)?;
            let b = 1.0 - 4.0 * tau / (c * delta);
            bounds.push(BoundRow { bound: "tail", tau, param: delta, mass, bound_value: b, pass: mass >= b });
        }
        if tau <= 1.0 {
            for a in [1.0, 2.0, 5.0] {
                let mass = horseshoe_mass(a, 2.0 * a, tau)?;
                let b = (-(10.0 * a / tau).ln()).exp();
                bounds.push(BoundRow { bound: "dyadic", tau, param: a, mass, bound_value: b, pass: mass >= b });
            }
        }
    }
    let rows: Vec<Vec<String>> = bounds
        .iter()
        .map(|r| vec![r.bound.to_string(), fmt(r.tau), fmt(r.param), fmt(r.mass), fmt(r.bound_value), r.pass.to_string()])
        .collect();
    out.write_csv("bounds.csv", &["bound", "tau", "param", "mass", "bound_value", "pass"], &rows)?;
    let pass = failures == 0 && bounds.iter().all(|b| b.pass);
    let report = HorseshoeReport { grid_points: h.grid_points * h.taus.len(), sandwich_failures: failures, bounds, pass };
    out.write_json("report.json", &report)?;
    out.finish(cfg)?;
    Ok(report)
}

fn normal_pdf(y: f64, m: f64, s2: f64) -> f64 {
    (-(y - m).powi(2) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt()
}

/// KL and V by nested quadrature in (x, y), x uniform on [−1, 1].
pub fn brute_kl_v(f: impl Fn(f64) -> f64 + Copy, f0: impl Fn(f64) -> f64 + Copy, s2: f64, s02: f64) -> Result<(f64, f64)> {
    let log_ratio = move |x: f64, y: f64| normal_pdf(y, f0(x), s02).ln() - normal_pdf(y, f(x), s2).ln();
    let half = 14.0 * s02.sqrt();
    let inner = |x: f64, g: &dyn Fn(f64) -> f64| {
        quad_1d(|y| normal_pdf(y, f0(x), s02) * g(y), f0(x) - half, f0(x) + half, 1e-13).unwrap_or(f64::NAN)
    };
    let kl = 0.5 * quad_1d(|x| inner(x, &|y| log_ratio(x, y)), -1.0, 1.0, 1e-12)?;
    let v = 0.5 * quad_1d(|x| inner(x, &|y| (log_ratio(x, y) - kl).powi(2)), -1.0, 1.0, 1e-12)?;
    Ok((kl, v))
}

/// Rényi divergence of order ρ by nested quadrature.
pub fn brute_renyi(f: impl Fn(f64) -> f64 + Copy, g: impl Fn(f64) -> f64 + Copy, rho: f64, s02: f64) -> Result<f64> {
    let inner = |x: f64| {
        let (a, b) = (f(x), g(x));
        let (lo, hi) = (a.min(b) - 14.0 * s02.sqrt(), a.max(b) + 14.0 * s02.sqrt());
        quad_1d(|y| normal_pdf(y, a, s02).powf(rho) * normal_pdf(y, b, s02).powf(1.0 - rho), lo, hi, 1e-13).unwrap_or(f64::NAN)
    };
    Ok(-(0.5 * quad_1d(inner, -1.0, 1.0, 1e-12)?).ln() / (1.0 - rho))
}

fn cubic(c: [f64; 4]) -> impl Fn(f64) -> f64 + Copy {
    move |x: f64| c[0] + x * (c[1] + x * (c[2] + x * c[3]))
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    pub max_formula_error: f64,
    pub renyi_pairs: usize,
    pub renyi_failures: usize,
    pub shift_cases: usize,
    pub shift_failures: usize,
    pub pass: bool,
}

pub fn divergence_check(cfg: &ExperimentConfig, out: &OutputDir) -> Result<DivergenceReport> {
    let dc = &cfg.divergence;
    let mut rng = RngStream::new(cfg.seed, 10).rng();
    let mut rows = Vec::new();
    let mut max_err = 0.0f64;
    for case in 0..dc.formula_cases {
        let coeffs = |r: &mut deep_hgp::numerics::rng::StreamRng| [0; 4].map(|_| r.random_range(-0.5..0.5));
        let (f, g) = (cubic(coeffs(&mut rng)), cubic(coeffs(&mut rng)));
        let s2 = rng.random_range(0.2..1.5);
        let s02 = rng.random_range(0.2..1.5);
        let rho = rng.random_range(0.1..0.9);
        let (kl, v) = kl_v_regression_uniform_1d(f, g, s2, s02)?;
        let (bkl, bv) = brute_kl_v(f, g, s2, s02)?;
        let d = renyi_regression_uniform_1d(f, g, rho, s02)?;
        let bd = brute_renyi(f, g, rho, s02)?;
        for (name, a, b) in [("kl", kl, bkl), ("v", v, bv), ("renyi", d, bd)] {
            let err = (a - b).abs();
            max_err = max_err.max(if err.is_nan() { f64::INFINITY } else { err });
            rows.push(vec![case.to_string(), name.to_string(), fmt(a), fmt(b), fmt(err)]);
        }
    }
    out.write_csv("formulas.csv", &["case", "quantity", "closed_form", "quadrature", "abs_error"], &rows)?;

    let mut rows = Vec::new();
    let mut renyi_failures = 0;
    for case in 0..dc.renyi_pairs {
        let (a1, b1, c1) = (rng.random_range(-1.0..1.0), rng.random_range(0.0..6.0), rng.random_range(0.0..6.3));
        let (a2, b2) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let f = move |x: f64| a1 * (b1 * x + c1).sin();
        let g = move |x: f64| clip_psi(a2 + b2 * x * x);
        let rho = rng.random_range(0.05..0.95);
        let s02 = rng.random_range(0.05..2.0);
        let d = renyi_regression_uniform_1d(f, g, rho, s02)?;
        let (m2, _) = gap_moments_uniform_1d(f, g)?;
        let lower = renyi_l2_lower_bound(m2, rho, s02);
        let upper = m2 / (2.0 * s02);
        let ok = lower <= d * (1.0 + ARITH_SLACK) + 1e-300 && d <= upper * (1.0 + ARITH_SLACK) + 1e-300;
        renyi_failures += usize::from(!ok);
        rows.push(vec![case.to_string(), fmt(rho), fmt(s02), fmt(m2), fmt(lower), fmt(d), fmt(upper), ok.to_string()]);
    }
    out.write_csv("renyi.csv", &["case", "rho", "sigma0_sq", "l2_sq", "lower", "renyi", "upper", "pass"], &rows)?;

    let mut rows = Vec::new();
    let mut shift_failures = 0;
    for case in 0..dc.shift_cases {
        let s02: f64 = rng.random_range(0.01..4.0);
        let eps = rng.random_range(0.0..1.0) / s02.sqrt();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let c = xi_const(s02)? * eps * sign;
        // constant gap: the moments are exact
        let (kl, v) = kl_v_from_moments(c * c, 0.0, s02, s02)?;
        let ok = kl <= eps * eps && v <= eps * eps;
        shift_failures += usize::from(!ok);
        rows.push(vec![case.to_string(), fmt(s02), fmt(eps), fmt(c), fmt(kl), fmt(v), ok.to_string()]);
    }
    out.write_csv("shifts.csv", &["case", "sigma0_sq", "eps", "shift", "kl", "v", "pass"], &rows)?;
    let pass = max_err <= dc.tolerance && renyi_failures == 0 && shift_failures == 0;
    let report =
        DivergenceReport { max_formula_error: max_err, renyi_pairs: dc.renyi_pairs, renyi_failures, shift_cases: dc.shift_cases, shift_failures, pass };
    out.write_json("report.json", &report)?;
    out.finish(cfg)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub cases: usize,
    pub max_rel_discrepancy: f64,
    pub pass: bool,
}

pub fn equivalence_check(cfg: &ExperimentConfig, out: &OutputDir) -> Result<EquivalenceReport> {
    let ec = &cfg.equivalence;
    if ec.bs.is_empty() || ec.max_n < 1 {
        return Err(CliError::Config("equivalence needs at least one b and max_n >= 1".into()));
    }
    let mut rng = RngStream::new(cfg.seed, 11).rng();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for case in 0..ec.cases {
        let n = rng.random_range(1..=ec.max_n);
        let b = ec.bs[case % ec.bs.len()];
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = rng.random_range(2..=6);
        let atoms: Vec<Atom> = (0..k)
            .map(|_| Atom { fvals: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), weight: rng.random_range(0.1..1.0) })
            .collect();
        let r = posterior_equivalence_check(&atoms, &y, b)?;
        worst = worst.max(r.max_rel_discrepancy);
        rows.push(vec![case.to_string(), n.to_string(), fmt(b), k.to_string(), fmt(r.max_rel_discrepancy)]);
    }
    out.write_csv("equivalence.csv", &["case", "n", "b", "atoms", "max_rel_discrepancy"], &rows)?;
    let report = EquivalenceReport { cases: ec.cases, max_rel_discrepancy: worst, pass: worst <= ec.tolerance };
    out.write_json("report.json", &report)?;
    out.finish(cfg)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationRow {
    pub scale: f64,
    pub regressor: f64,
    pub neglog: NegLogProb,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub eps: f64,
    pub rows: Vec<ConcentrationRow>,
    pub increasing: bool,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub pass: bool,
}

/// Least squares of `y` on `x` with intercept: (slope, intercept, r²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// `−log P(‖W^A‖_∞ < ε)` over isotropic scales, regressed on a·log²(2a/ε).
pub fn concentration(cfg: &ExperimentConfig, out: &OutputDir) -> Result<ConcentrationReport> {
    let cc = &cfg.concentration;
    if cc.scales.len() < 2 || cc.d == 0 || cc.grid < 2 {
        return Err(CliError::Config("concentration needs >= 2 scales, d >= 1 and grid >= 2".into()));
    }
    let grid = DesignPoints::grid(cc.grid, cc.d);
    let mut rows = Vec::new();
    for (i, &a) in cc.scales.iter().enumerate() {
        let scales = Lengthscales::splat(a, cc.d)?;
        let neglog = small_ball_neglog(&scales, cc.eps, &grid, cc.draws, RngStream::new(cfg.seed, 12).child(i as u64))?;
        let regressor = a * (2.0 * a / cc.eps).ln().powi(2);
        rows.push(ConcentrationRow { scale: a, regressor, neglog });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.regressor).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.neglog.value).collect();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    let mut order: Vec<&ConcentrationRow> = rows.iter().collect();
    order.sort_by(|a, b| a.scale.total_cmp(&b.scale));
    let increasing = order.windows(2).all(|w| w[1].neglog.value > w[0].neglog.value);
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![fmt(r.scale), fmt(r.regressor), fmt(r.neglog.value), fmt(r.neglog.ci.0), fmt(r.neglog.ci.1), r.neglog.count.to_string(), r.neglog.n.to_string()]
        })
        .collect();
    out.write_csv("small_ball.csv", &["scale", "regressor", "neglog_prob", "ci_lo", "ci_hi", "hits", "draws"], &csv_rows)?;
    let pts = order.iter().map(|r| (r.regressor, r.neglog.value)).collect();
    let fit = order.iter().map(|r| (r.regressor, intercept + slope * r.regressor)).collect();
    let series = [Series { name: "estimate".into(), points: pts }, Series { name: "least squares".into(), points: fit }];
    let axes = Axes { log_x: false, log_y: false };
    out.write_text("small_ball.svg", &svg::line_plot("small-ball exponent", "a log^2(2a/eps)", "-log P", &series, axes))?;
    let pass = increasing && slope > 0.0 && r2 >= cc.min_r2;
    let report = ConcentrationReport { eps: cc.eps, rows, increasing, slope, intercept, r2, pass };
    out.write_json("report.json", &report)?;
    out.finish(cfg)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct PriorSampleReport {
    pub draws: usize,
    pub grid_points: usize,
    pub layers: usize,
}

/// Prior path draws on a grid; for layered priors every intermediate layer
/// output is written as well.
pub fn prior_sample(cfg: &ExperimentConfig, out: &OutputDir) -> Result<PriorSampleReport> {
    let ps = &cfg.prior_sample;
    let prior = cfg.prior.as_ref().ok_or_else(|| CliError::Config("a [prior] section is required".into()))?;
    let n = cfg.ns.first().copied().unwrap_or(1);
    let d = match (prior, &cfg.truth) {
        (crate::config::PriorConfig::Deep { widths, .. }, _) => widths[0],
        (crate::config::PriorConfig::Deterministic { values }, _) => values.len(),
        (_, Some(t)) => t.build()?.dim(),
        _ => 1,
    };
    if ps.grid.pow(d as u32) > crate::config::MAX_GRID {
        return Err(CliError::Config(format!("prior_sample.grid^{d} exceeds {}", crate::config::MAX_GRID)));
    }
    let grid = DesignPoints::grid(ps.grid, d);
    let model = prior.model(n, d)?;
    let mut rows = Vec::new();
    let mut plots: Vec<Vec<Series>> = Vec::new();
    let mut layers = 1;
    for draw in 0..ps.draws {
        let stream = RngStream::new(cfg.seed, 13).child(draw as u64);
        let outputs: Vec<Vec<Vec<f64>>> = match &model {
            Model::Deep(arch) => {
                let g = deep_prior_draw(arch, ps.m_features, stream)?;
                grid.iter().map(|x| g.layer_outputs(x)).collect::<deep_hgp::Result<_>>()?
            }
            Model::Hgp(p) => {
                let (_, path) = hgp_prior_draw(p, d, ps.m_features, stream)?;
                grid.iter().map(|x| Ok(vec![vec![clip_psi(path.eval(x)?)]])).collect::<deep_hgp::Result<_>>()?
            }
        };
        layers = outputs[0].len();
        for (x, outs) in grid.iter().zip(&outputs) {
            for (l, layer) in outs.iter().enumerate() {
                for (j, v) in layer.iter().enumerate() {
                    let coords = x.iter().map(|c| fmt(*c)).collect::<Vec<_>>().join(";");
                    rows.push(vec![draw.to_string(), coords, l.to_string(), j.to_string(), fmt(*v)]);
                }
            }
        }
        if d == 1 {
            while plots.len() < layers {
                plots.push(Vec::new());
            }
            for (l, plot) in plots.iter_mut().enumerate() {
                for j in 0..outputs[0][l].len() {
                    let pts = grid.iter().zip(&outputs).map(|(x, o)| (x[0], o[l][j])).collect();
                    plot.push(Series { name: format!("draw {draw} unit {j}"), points: pts });
                }
            }
        }
    }
    out.write_csv("paths.csv", &["draw", "x", "layer", "unit", "value"], &rows)?;
    for (l, series) in plots.iter().enumerate() {
        let axes = Axes { log_x: false, log_y: false };
        let title = format!("prior draws, output of layer {l}");
        out.write_text(&format!("paths_layer{l}.svg"), &svg::line_plot(&title, "x", "value", series, axes))?;
    }
    let report = PriorSampleReport { draws: ps.draws, grid_points: grid.len(), layers };
    out.write_json("report.json", &report)?;
    out.finish(cfg)?;
    Ok(report)
}
