//! Ground-truth regression functions with known structure: sparse
//! (variable-selection) truths, additive and compositional truths, and the
//! bump hypotheses used for minimax lower bounds. Also a grid estimate of the
//! Hölder norm and the target-rate calculator.

use crate::error::{Error, Result};
use crate::numerics::rng::RngStream;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Smooth base function of `k` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseFunction {
    Zero,
    /// `offset + Σ c_j u_j`.
    Linear { coeffs: Vec<f64>, offset: f64 },
    /// `scale · Π_j cos(π ω_j u_j + φ_j)`.
    CosProduct { freqs: Vec<f64>, phases: Vec<f64>, scale: f64 },
    /// `scale · Π_j W(u_j)` with the normalised Weierstrass-type partial sum
    /// `W(u) = Σ_{k<terms} a^k cos(b^k π u) / Σ_{k<terms} a^k`, whose
    /// smoothness is roughly `log(1/a)/log b`.
    Weierstrass { dim: usize, ratio: f64, base: f64, terms: usize, scale: f64 },
}

impl BaseFunction {
    /// Number of inputs, or `None` when any number is accepted.
    pub fn arity(&self) -> Option<usize> {
        match self {
            BaseFunction::Zero => None,
            BaseFunction::Linear { coeffs, .. } => Some(coeffs.len()),
            BaseFunction::CosProduct { freqs, .. } => Some(freqs.len()),
            BaseFunction::Weierstrass { dim, .. } => Some(*dim),
        }
    }

    /// A bound on `sup |g|` over `[−1, 1]^k`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            BaseFunction::Zero => 0.0,
            BaseFunction::Linear { coeffs, offset } => offset.abs() + coeffs.iter().map(|c| c.abs()).sum::<f64>(),
            BaseFunction::CosProduct { scale, .. } | BaseFunction::Weierstrass { scale, .. } => scale.abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaseFunction::CosProduct { freqs, phases, .. } if freqs.len() != phases.len() => {
                Err(Error::DimensionMismatch { expected: freqs.len(), got: phases.len() })
            }
            BaseFunction::Weierstrass { ratio, base, terms, .. } if !(*ratio > 0.0 && *ratio < 1.0 && *base > 1.0 && *terms >= 1) => {
                Err(Error::InvalidConfig("weierstrass needs 0 < ratio < 1, base > 1, terms >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if let Some(k) = self.arity() {
            if u.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: u.len() });
            }
        }
        Ok(match self {
            BaseFunction::Zero => 0.0,
            BaseFunction::Linear { coeffs, offset } => offset + coeffs.iter().zip(u).map(|(c, x)| c * x).sum::<f64>(),
            BaseFunction::CosProduct { freqs, phases, scale } => {
                scale * freqs.iter().zip(phases).zip(u).map(|((w, p), x)| (PI * w * x + p).cos()).product::<f64>()
            }
            BaseFunction::Weierstrass { ratio, base, terms, scale, .. } => {
                let norm: f64 = (0..*terms).map(|k| ratio.powi(k as i32)).sum();
                let w = |x: f64| {
                    (0..*terms).map(|k| ratio.powi(k as i32) * (base.powi(k as i32) * PI * x).cos()).sum::<f64>() / norm
                };
                scale * u.iter().map(|&x| w(x)).product::<f64>()
            }
        })
    }
}

/// One coordinate function of a composition layer: a base function of the
/// selected (0-based) inputs of the previous layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionUnit {
    pub inputs: Vec<usize>,
    pub g: BaseFunction,
}

/// Structural parameters of a compositional class: widths `d₀, …, d_{q+1}`,
/// active widths `t₀, …, t_q` and smoothness `β₀, …, β_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub widths: Vec<usize>,
    pub t: Vec<usize>,
    pub betas: Vec<f64>,
}

impl StructureSpec {
    pub fn new(widths: Vec<usize>, t: Vec<usize>, betas: Vec<f64>) -> Result<Self> {
        let s = Self { widths, t, betas };
        s.validate()?;
        Ok(s)
    }

    /// Single layer of smoothness `beta` depending on `t` of `d` inputs.
    pub fn single(d: usize, t: usize, beta: f64) -> Result<Self> {
        Self::new(vec![d, 1], vec![t], vec![beta])
    }

    /// Additive model `Σ g_i(x_i)` as a two-layer composition with inner
    /// smoothness `beta` and outer smoothness `outer_beta`.
    pub fn additive(d: usize, beta: f64, outer_beta: f64) -> Result<Self> {
        Self::new(vec![d, d, 1], vec![1, d], vec![beta, outer_beta])
    }

    pub fn q(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || *self.widths.last().unwrap() != 1 {
            return Err(Error::InvalidConfig("structure needs widths d_0..d_{q+1} with d_{q+1} = 1".into()));
        }
        let layers = self.widths.len() - 1;
        if self.t.len() != layers || self.betas.len() != layers {
            return Err(Error::InvalidConfig(format!("structure needs {layers} active widths and smoothness values")));
        }
        for i in 0..layers {
            if self.t[i] == 0 || self.t[i] > self.widths[i] {
                return Err(Error::InvalidConfig(format!("t_{i} = {} must lie in 1..={}", self.t[i], self.widths[i])));
            }
            if !(self.betas[i] > 0.0) {
                return Err(Error::InvalidConfig(format!("beta_{i} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Minimax hypothesis `f_ω(x) = Σ_k ω_k L h^β Π_j K((x_j − x_kj)/h)` on a
/// regular grid of `(2m)^d` cells of side `h = 1/m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub omega: Vec<bool>,
    pub m: usize,
    pub amplitude: f64,
    pub beta: f64,
    pub d: usize,
    pub kernel: BumpKernel,
}

impl BumpFunction {
    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn cells(&self) -> usize {
        (2 * self.m).pow(self.d as u32)
    }

    /// Centre of cell `k` (flat index, first coordinate fastest).
    pub fn center(&self, k: usize) -> Vec<f64> {
        let side = 2 * self.m;
        let mut rest = k;
        (0..self.d)
            .map(|_| {
                let i = rest % side;
                rest /= side;
                -1.0 + (i as f64 + 0.5) * self.h()
            })
            .collect()
    }

    /// Index of the cell containing `x`.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let side = 2 * self.m;
        x.iter().rev().fold(0, |acc, &xi| {
            let i = (((xi + 1.0) * self.m as f64).floor().max(0.0) as usize).min(side - 1);
            acc * side + i
        })
    }

    /// `φ_k(x)`.
    pub fn phi(&self, k: usize, x: &[f64]) -> f64 {
        let h = self.h();
        let c = self.center(k);
        self.amplitude * h.powf(self.beta) * x.iter().zip(&c).map(|(xi, ci)| self.kernel.eval((xi - ci) / h)).product::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let k = self.cell_of(x);
        if self.omega[k] {
            self.phi(k, x)
        } else {
            0.0
        }
    }
}

/// Ground-truth regression function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthFunction {
    /// `f(x) = g(x_S)`, depending only on the (0-based) active coordinates.
    VarSelect { g: BaseFunction, active: Vec<usize>, d: usize, beta: f64, k: f64 },
    /// `f(x) = Σ_i g_i(x_i)`.
    Additive { gs: Vec<BaseFunction>, beta: f64 },
    /// `f = h_q ∘ ⋯ ∘ h_0`, `layers[i][j]` being coordinate `j` of `h_i`.
    Composition { layers: Vec<Vec<CompositionUnit>>, structure: StructureSpec, k: f64 },
    Bump(BumpFunction),
}

impl TruthFunction {
    pub fn dim(&self) -> usize {
        match self {
            TruthFunction::VarSelect { d, .. } => *d,
            TruthFunction::Additive { gs, .. } => gs.len(),
            TruthFunction::Composition { structure, .. } => structure.widths[0],
            TruthFunction::Bump(b) => b.d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TruthFunction::VarSelect { g, active, d, .. } => {
                g.validate()?;
                if active.is_empty() {
                    return Err(Error::EmptyActiveSet);
                }
                if let Some(&i) = active.iter().find(|&&i| i >= *d) {
                    return Err(Error::DimensionMismatch { expected: *d, got: i + 1 });
                }
                if g.arity().is_some_and(|k| k != active.len()) {
                    return Err(Error::DimensionMismatch { expected: active.len(), got: g.arity().unwrap() });
                }
                if g.sup_bound() > 1.0 {
                    return Err(Error::InvalidConfig("variable-selection truth must satisfy sup |g| <= 1".into()));
                }
            }
            TruthFunction::Additive { gs, .. } => {
                if gs.is_empty() {
                    return Err(Error::InvalidConfig("additive truth needs at least one component".into()));
                }
                for g in gs {
                    g.validate()?;
                    if g.arity().is_some_and(|k| k != 1) {
                        return Err(Error::DimensionMismatch { expected: 1, got: g.arity().unwrap() });
                    }
                }
            }
            TruthFunction::Composition { layers, structure, .. } => {
                structure.validate()?;
                if layers.len() != structure.widths.len() - 1 {
                    return Err(Error::DimensionMismatch { expected: structure.widths.len() - 1, got: layers.len() });
                }
                for (i, layer) in layers.iter().enumerate() {
                    if layer.len() != structure.widths[i + 1] {
                        return Err(Error::DimensionMismatch { expected: structure.widths[i + 1], got: layer.len() });
                    }
                    for u in layer {
                        u.g.validate()?;
                        if u.inputs.len() > structure.t[i] || u.inputs.iter().any(|&j| j >= structure.widths[i]) {
                            return Err(Error::InvalidConfig(format!("unit of layer {i} uses inputs outside its active width")));
                        }
                        if u.g.sup_bound() > 1.0 {
                            return Err(Error::InvalidConfig("composition layers must map into [-1, 1]".into()));
                        }
                    }
                }
            }
            TruthFunction::Bump(b) => {
                if b.omega.len() != b.cells() {
                    return Err(Error::DimensionMismatch { expected: b.cells(), got: b.omega.len() });
                }
            }
        }
        Ok(())
    }

    /// Smoothness β (of the innermost layer for compositions).
    pub fn beta(&self) -> f64 {
        match self {
            TruthFunction::VarSelect { beta, .. } | TruthFunction::Additive { beta, .. } => *beta,
            TruthFunction::Composition { structure, .. } => structure.betas[0],
            TruthFunction::Bump(b) => b.beta,
        }
    }

    /// Active coordinates, where the notion applies.
    pub fn active_set(&self) -> Option<&[usize]> {
        match self {
            TruthFunction::VarSelect { active, .. } => Some(active),
            _ => None,
        }
    }
}

pub fn eval_truth(f: &TruthFunction, x: &[f64]) -> Result<f64> {
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: x.len() });
    }
    match f {
        TruthFunction::VarSelect { g, active, .. } => {
            let u: Vec<f64> = active.iter().map(|&i| x[i]).collect();
            g.eval(&u)
        }
        TruthFunction::Additive { gs, .. } => gs.iter().zip(x).map(|(g, &xi)| g.eval(&[xi])).sum(),
        TruthFunction::Composition { layers, .. } => {
            let mut h = x.to_vec();
            for layer in layers {
                h = layer
                    .iter()
                    .map(|u| {
                        let v: Vec<f64> = u.inputs.iter().map(|&j| h[j]).collect();
                        u.g.eval(&v)
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            Ok(h[0])
        }
        TruthFunction::Bump(b) => Ok(b.eval(x)),
    }
}

/// Compactly supported mollifier `K(x) = c·exp(−1/(1 − 4x²))` on `|x| < 1/2`,
/// with `c` calibrated so that the estimated Hölder norm is `1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpKernel {
    pub c: f64,
    pub beta: f64,
}

/// Grid size used when calibrating the mollifier.
const CALIBRATION_GRID: usize = 4001;

fn mollifier(x: f64) -> f64 {
    let s = 1.0 - 4.0 * x * x;
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

impl BumpKernel {
    pub fn calibrated(beta: f64) -> Result<Self> {
        let raw = holder_norm_estimate(|x: &[f64]| mollifier(x[0]), beta, 1, CALIBRATION_GRID)?;
        Ok(Self { c: 0.5 / raw, beta })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c * mollifier(x)
    }

    pub fn sup(&self) -> f64 {
        self.c * (-1.0f64).exp()
    }

    /// `∫ K²`.
    pub fn l2_norm_sq(&self) -> Result<f64> {
        crate::numerics::quad::quad_1d(|x| self.eval(x).powi(2), -0.5, 0.5, 1e-13)
    }

    /// Estimated `‖K‖_{β,∞}` (equal to 1/2 up to grid effects).
    pub fn holder_norm(&self) -> Result<f64> {
        holder_norm_estimate(|x: &[f64]| self.eval(x[0]), self.beta, 1, CALIBRATION_GRID)
    }
}

/// `K(x)` for the mollifier calibrated to smoothness `beta`.
pub fn bump_kernel(x: f64, beta: f64) -> Result<f64> {
    Ok(BumpKernel::calibrated(beta)?.eval(x))
}

/// Amplitude `L = D / (4d ‖K‖^d_{β,∞})` placing every hypothesis in the
/// Hölder ball of radius `D`.
pub fn bump_amplitude(radius: f64, d: usize, kernel: &BumpKernel) -> Result<f64> {
    Ok(radius / (4.0 * d as f64 * kernel.holder_norm()?.powi(d as i32)))
}

/// Largest number of cells accepted by [`build_bump_hypotheses`].
pub const MAX_BUMP_CELLS: usize = 4096;

/// Minimax hypotheses with `m = ⌈n^{1/(2β+d)}⌉`.
pub fn build_bump_hypotheses(n: usize, beta: f64, d: usize, amplitude: f64, count: usize, rng: RngStream) -> Result<Vec<TruthFunction>> {
    build_bump_hypotheses_with(1.0, n, beta, d, amplitude, count, rng)
}

/// Minimum pairwise Hamming distance required of the codewords.
pub fn vg_min_distance(cells: usize) -> usize {
    cells.div_ceil(8)
}

pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// As [`build_bump_hypotheses`] with `m = ⌈c₀ n^{1/(2β+d)}⌉`.
pub fn build_bump_hypotheses_with(
    c0: f64,
    n: usize,
    beta: f64,
    d: usize,
    amplitude: f64,
    count: usize,
    rng: RngStream,
) -> Result<Vec<TruthFunction>> {
    if count < 2 {
        return Err(Error::InvalidConfig("need at least two hypotheses".into()));
    }
    if d == 0 || n == 0 || !(beta > 0.0) || !(c0 > 0.0) {
        return Err(Error::InvalidConfig("bump hypotheses need n, d >= 1 and beta, c0 > 0".into()));
    }
    let m = (c0 * (n as f64).powf(1.0 / (2.0 * beta + d as f64))).ceil().max(1.0) as usize;
    let cells = (2 * m).checked_pow(d as u32).unwrap_or(usize::MAX);
    if cells > MAX_BUMP_CELLS {
        return Err(Error::CapacityExceeded { requested: cells, found: MAX_BUMP_CELLS });
    }
    let kernel = BumpKernel::calibrated(beta)?;
    let min_dist = vg_min_distance(cells);
    let mut r = rng.rng();
    let mut codes: Vec<Vec<bool>> = vec![vec![false; cells]];
    let max_attempts = 2000 * count;
    let mut attempts = 0;
    while codes.len() < count && attempts < max_attempts {
        attempts += 1;
        let cand: Vec<bool> = (0..cells).map(|_| r.random::<bool>()).collect();
        if codes.iter().all(|c| hamming(c, &cand) >= min_dist) {
            codes.push(cand);
        }
    }
    if codes.len() < count {
        return Err(Error::CapacityExceeded { requested: count, found: codes.len() });
    }
    Ok(codes
        .into_iter()
        .map(|omega| TruthFunction::Bump(BumpFunction { omega, m, amplitude, beta, d, kernel }))
        .collect())
}

/// Largest integer strictly smaller than `beta`.
pub fn holder_floor(beta: f64) -> u32 {
    (beta.ceil() - 1.0).max(0.0) as u32
}

fn multi_indices(d: usize, max_order: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; d]];
    let mut frontier = out.clone();
    for _ in 0..max_order {
        let mut next = Vec::new();
        for a in &frontier {
            let last = a.iter().rposition(|&v| v > 0).unwrap_or(0);
            for j in last..d {
                let mut b = a.clone();
                b[j] += 1;
                next.push(b);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn binom(k: u32, i: u32) -> f64 {
    (0..i).fold(1.0, |acc, t| acc * (k - t) as f64 / (t + 1) as f64)
}

/// Central finite-difference estimate of `∂^α f(x)`, with the stencil shifted
/// inside `[−1, 1]^d` near the boundary.
fn fd_derivative(f: &impl Fn(&[f64]) -> f64, x: &[f64], alpha: &[u32], delta: f64) -> f64 {
    let d = x.len();
    let center: Vec<f64> = x
        .iter()
        .zip(alpha)
        .map(|(&xi, &a)| {
            let r = a as f64 * delta / 2.0;
            xi.clamp(-1.0 + r, 1.0 - r)
        })
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0u32; d];
    let mut y = center.clone();
    loop {
        let mut w = 1.0;
        for j in 0..d {
            let (a, i) = (alpha[j], idx[j]);
            w *= if i % 2 == 0 { 1.0 } else { -1.0 } * binom(a, i);
            y[j] = center[j] + (a as f64 / 2.0 - i as f64) * delta;
        }
        total += w * f(&y);
        let mut j = 0;
        loop {
            if j == d {
                let order: u32 = alpha.iter().sum();
                return total / delta.powi(order as i32);
            }
            if idx[j] < alpha[j] {
                idx[j] += 1;
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Points per axis above which Hölder quotients use a neighbourhood window
/// instead of all pairs.
const ALL_PAIRS_LIMIT: usize = 5000;
const PAIR_WINDOW: usize = 8;

/// Grid lower bound on `‖f‖_{β,∞}`: the maximum over a `grid_size^d` grid of
/// `|∂^α f|`, `|α| ≤ ⌊β⌋`, and of the Hölder quotients of the order-`⌊β⌋`
/// derivatives in the sup-metric.
pub fn holder_norm_estimate(f: impl Fn(&[f64]) -> f64, beta: f64, d: usize, grid_size: usize) -> Result<f64> {
    let r = holder_floor(beta);
    if r > 3 {
        return Err(Error::UnsupportedSmoothness(r));
    }
    if d == 0 || grid_size < 2 {
        return Err(Error::InvalidConfig("holder estimate needs d >= 1 and grid_size >= 2".into()));
    }
    let total = grid_size.checked_pow(d as u32).ok_or(Error::CapacityExceeded { requested: usize::MAX, found: 0 })?;
    let spacing = 2.0 / (grid_size - 1) as f64;
    let delta = spacing / 2.0;
    let point = |flat: usize| -> Vec<f64> {
        let mut rest = flat;
        (0..d)
            .map(|_| {
                let i = rest % grid_size;
                rest /= grid_size;
                -1.0 + i as f64 * spacing
            })
            .collect()
    };
    let points: Vec<Vec<f64>> = (0..total).map(point).collect();
    let mut best = 0.0f64;
    let mut top: Vec<Vec<f64>> = Vec::new();
    for alpha in multi_indices(d, r) {
        let order: u32 = alpha.iter().sum();
        let vals: Vec<f64> = points.iter().map(|x| fd_derivative(&f, x, &alpha, delta)).collect();
        best = vals.iter().fold(best, |b, v| b.max(v.abs()));
        if order == r {
            top.push(vals);
        }
    }
    let expo = beta - r as f64;
    let all_pairs = total <= ALL_PAIRS_LIMIT;
    let coords = |flat: usize| -> Vec<usize> {
        let mut rest = flat;
        (0..d)
            .map(|_| {
                let i = rest % grid_size;
                rest /= grid_size;
                i
            })
            .collect()
    };
    for vals in &top {
        for p in 0..total {
            let cp = coords(p);
            for q in (p + 1)..total {
                let cq = coords(q);
                let steps = cp.iter().zip(&cq).map(|(a, b)| a.abs_diff(*b)).max().unwrap();
                if !all_pairs && steps > PAIR_WINDOW {
                    if cq[d - 1] > cp[d - 1] + PAIR_WINDOW {
                        break;
                    }
                    continue;
                }
                let dist = steps as f64 * spacing;
                best = best.max((vals[p] - vals[q]).abs() / dist.powf(expo));
            }
        }
    }
    Ok(best)
}

/// `max_i n^{−β_iα_i/(2β_iα_i + t_i)}` with `α_i = Π_{l>i} (β_l ∧ 1)`;
/// logarithmic factors are omitted.
pub fn target_rate(spec: &StructureSpec, n: usize) -> f64 {
    let nf = n as f64;
    let layers = spec.betas.len();
    (0..layers)
        .map(|i| {
            let alpha: f64 = spec.betas[i + 1..].iter().map(|b| b.min(1.0)).product();
            let ba = spec.betas[i] * alpha;
            nf.powf(-ba / (2.0 * ba + spec.t[i] as f64))
        })
        .fold(0.0, f64::max)
}

/// Default sparse truth `g(u) = scale · Π cos(π ω u + φ)` on the given
/// active coordinates.
pub fn cos_varselect(d: usize, active: Vec<usize>, freq: f64, phase: f64, scale: f64, beta: f64) -> Result<TruthFunction> {
    let k = active.len();
    let f = TruthFunction::VarSelect {
        g: BaseFunction::CosProduct { freqs: vec![freq; k], phases: vec![phase; k], scale },
        active,
        d,
        beta,
        k: scale * (PI * freq).powi(beta.ceil() as i32).max(1.0),
    };
    f.validate()?;
    Ok(f)
}
