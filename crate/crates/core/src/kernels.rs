//! Multibandwidth squared-exponential covariance machinery.
//!
//! The process `W^A(x) = W(A₁x₁, …, A_dx_d)` has covariance
//! `exp(−Σ_k A_k²(x_k − y_k)²)`. Large `A_k` makes paths wiggly along
//! coordinate `k`; `A_k = 0` freezes them.

use crate::error::{Error, Result};
use crate::numerics::linalg::{cholesky_with_jitter, default_jitter_schedule, dot, mvn_sample, CholFactor, Matrix, PsdMatrix};
use crate::numerics::rng::RngStream;
use crate::scalar::Real;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Default number of random features per path.
pub const DEFAULT_FEATURES: usize = 512;

/// Inverse-bandwidths `A = (A₁, …, A_d)`, all finite and nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct Lengthscales<T>(Vec<T>);

impl<T: Real> Lengthscales<T> {
    pub fn new(a: Vec<T>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::DomainError("lengthscales need dimension >= 1".into()));
        }
        if let Some(bad) = a.iter().find(|v| !v.is_finite() || **v < T::zero()) {
            return Err(Error::DomainError(format!("lengthscale {bad} is not finite and >= 0")));
        }
        Ok(Self(a))
    }

    pub fn splat(value: T, d: usize) -> Result<Self> {
        Self::new(vec![value; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::zero(), T::max)
    }
}

impl<T: Real> TryFrom<Vec<T>> for Lengthscales<T> {
    type Error = Error;
    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T> From<Lengthscales<T>> for Vec<T> {
    fn from(l: Lengthscales<T>) -> Self {
        l.0
    }
}

/// `n` points of `[−1, 1]^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoints<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> DesignPoints<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DomainError("design dimension must be >= 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: data.len() % dim });
        }
        if let Some(bad) = data.iter().find(|v| !(v.abs() <= T::one())) {
            return Err(Error::DomainError(format!("design coordinate {bad} outside [-1, 1]")));
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<T>]) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        Self::new(dim, rows.concat())
    }

    /// `n` i.i.d. uniform points.
    pub fn uniform<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Self {
        let data = (0..n * dim).map(|_| T::c(rng.random_range(-1.0..=1.0))).collect();
        Self { dim, data }
    }

    /// Tensor grid with `per_dim` equispaced points per coordinate, endpoints included.
    pub fn grid(per_dim: usize, dim: usize) -> Self {
        let axis: Vec<T> = match per_dim {
            0 => Vec::new(),
            1 => vec![T::zero()],
            k => (0..k).map(|i| T::c(-1.0 + 2.0 * i as f64 / (k - 1) as f64)).collect(),
        };
        let total = per_dim.pow(dim as u32);
        let mut data = Vec::with_capacity(total * dim);
        for mut idx in 0..total {
            for _ in 0..dim {
                data.push(axis[idx % per_dim]);
                idx /= per_dim;
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// Stationary or not, anything that can fill a covariance matrix.
pub trait CovarianceKernel<T> {
    fn dim(&self) -> usize;
    fn cov(&self, x: &[T], y: &[T]) -> T;
}

/// `k_A(x, y) = exp(−Σ_k A_k²(x_k − y_k)²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SqExp<T> {
    pub lengthscales: Lengthscales<T>,
}

impl<T: Real> CovarianceKernel<T> for SqExp<T> {
    fn dim(&self) -> usize {
        self.lengthscales.dim()
    }

    #[inline]
    fn cov(&self, x: &[T], y: &[T]) -> T {
        let s = self
            .lengthscales
            .0
            .iter()
            .zip(x.iter().zip(y))
            .fold(T::zero(), |acc, (&a, (&u, &v))| {
                let t = a * (u - v);
                acc + t * t
            });
        (-s).exp()
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Cross-covariance matrix `K(X, Y)` for an arbitrary kernel.
pub fn cross_cov<T: Real, K: CovarianceKernel<T>>(kernel: &K, x: &DesignPoints<T>, y: &DesignPoints<T>) -> Result<Matrix<T>> {
    check_dim(kernel.dim(), x.dim())?;
    check_dim(kernel.dim(), y.dim())?;
    Ok(Matrix::from_fn(x.len(), y.len(), |i, j| kernel.cov(x.point(i), y.point(j))))
}

/// Symmetric covariance matrix `K(X, X)`.
pub fn gram<T: Real, K: CovarianceKernel<T>>(kernel: &K, x: &DesignPoints<T>) -> Result<PsdMatrix<T>> {
    check_dim(kernel.dim(), x.dim())?;
    Ok(PsdMatrix::from_lower_fn(x.len(), |i, j| kernel.cov(x.point(i), x.point(j))))
}

/// SqExp cross-covariance with entries `exp(−Σ_k A_k²(x_ik − y_jk)²)`.
pub fn sqexp_cov<T: Real>(x: &DesignPoints<T>, y: &DesignPoints<T>, a: &Lengthscales<T>) -> Result<Matrix<T>> {
    cross_cov(&SqExp { lengthscales: a.clone() }, x, y)
}

/// SqExp covariance of `X` with itself.
pub fn sqexp_gram<T: Real>(x: &DesignPoints<T>, a: &Lengthscales<T>) -> Result<PsdMatrix<T>> {
    gram(&SqExp { lengthscales: a.clone() }, x)
}

/// Gaussian conditional law at new points.
#[derive(Debug, Clone, PartialEq)]
pub struct GpConditional<T> {
    pub mean: Vec<T>,
    pub cov: PsdMatrix<T>,
}

/// Conditional law of the SqExp process at `xnew` given noisy observations
/// `values` at `anchors`.
pub fn gp_conditional<T: Real>(
    anchors: &DesignPoints<T>,
    values: &[T],
    a: &Lengthscales<T>,
    noise_var: T,
    xnew: &DesignPoints<T>,
) -> Result<GpConditional<T>> {
    gp_conditional_with(&SqExp { lengthscales: a.clone() }, anchors, values, noise_var, xnew)
}

/// [`gp_conditional`] for any covariance kernel.
pub fn gp_conditional_with<T: Real, K: CovarianceKernel<T>>(
    kernel: &K,
    anchors: &DesignPoints<T>,
    values: &[T],
    noise_var: T,
    xnew: &DesignPoints<T>,
) -> Result<GpConditional<T>> {
    check_dim(anchors.len(), values.len())?;
    if !(noise_var >= T::zero()) {
        return Err(Error::DomainError(format!("noise variance {noise_var} < 0")));
    }
    let prior = gram(kernel, xnew)?;
    if anchors.is_empty() {
        return Ok(GpConditional { mean: vec![T::zero(); xnew.len()], cov: prior });
    }
    let kaa = gram(kernel, anchors)?.into_matrix();
    let kaa = PsdMatrix::from_lower_fn(anchors.len(), |i, j| kaa[(i, j)] + if i == j { noise_var } else { T::zero() });
    let chol = cholesky_with_jitter(&kaa, &default_jitter_schedule(&kaa))?;
    let alpha = chol.solve(values)?;
    let kna = cross_cov(kernel, xnew, anchors)?;
    let mean = (0..xnew.len()).map(|i| dot(kna.row(i), &alpha)).collect();
    // V = L⁻¹ K(A, X*), one column per new point
    let v: Vec<Vec<T>> = (0..xnew.len()).map(|i| chol.solve_lower(kna.row(i))).collect();
    let cov = PsdMatrix::from_lower_fn(xnew.len(), |i, j| prior.matrix()[(i, j)] - dot(&v[i], &v[j]));
    Ok(GpConditional { mean, cov })
}

/// Fixed random-feature basis `x ↦ √(2/m) cos(⟨ω_j, A⊙x⟩ + b_j)` with
/// `ω_j ~ N(0, 2I)` and `b_j ~ U[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBasis<T> {
    dim: usize,
    omega: Vec<T>,
    phase: Vec<T>,
}

impl<T: Real> FeatureBasis<T> {
    pub fn draw<R: Rng + ?Sized>(m: usize, dim: usize, rng: &mut R) -> Self {
        let sd = std::f64::consts::SQRT_2;
        let omega = (0..m * dim).map(|_| T::c(sd * rng.sample::<f64, _>(StandardNormal))).collect();
        let phase = (0..m).map(|_| T::c(rng.random_range(0.0..std::f64::consts::TAU))).collect();
        Self { dim, omega, phase }
    }

    pub fn from_parts(dim: usize, omega: Vec<T>, phase: Vec<T>) -> Result<Self> {
        check_dim(phase.len() * dim, omega.len())?;
        Ok(Self { dim, omega, phase })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    pub fn omega(&self, j: usize) -> &[T] {
        &self.omega[j * self.dim..(j + 1) * self.dim]
    }

    pub fn phases(&self) -> &[T] {
        &self.phase
    }

    pub fn scale(&self) -> T {
        (T::c(2.0) / T::c(self.len() as f64)).sqrt()
    }

    /// Feature vector at `x` (length m).
    pub fn features(&self, x: &[T], a: &[T]) -> Vec<T> {
        let s = self.scale();
        (0..self.len())
            .map(|j| {
                let arg = self.omega(j).iter().zip(a.iter().zip(x)).fold(self.phase[j], |acc, (&w, (&ak, &xk))| acc + w * ak * xk);
                s * arg.cos()
            })
            .collect()
    }
}

/// Covariance of a random-feature path with standard normal weights:
/// `(2/m) Σ_j cos(⟨ω_j, A⊙x⟩ + b_j) cos(⟨ω_j, A⊙y⟩ + b_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureKernel<T> {
    pub basis: FeatureBasis<T>,
    pub lengthscales: Lengthscales<T>,
}

impl<T: Real> CovarianceKernel<T> for FeatureKernel<T> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn cov(&self, x: &[T], y: &[T]) -> T {
        let a = self.lengthscales.as_slice();
        dot(&self.basis.features(x, a), &self.basis.features(y, a))
    }
}

/// One sample path of `W^A` as a random-feature expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct RandomFeaturePath<T> {
    pub basis: FeatureBasis<T>,
    pub weights: Vec<T>,
    pub lengthscales: Lengthscales<T>,
}

/// Conditional-mean interpolant of a path through anchor values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConditionalPath<T> {
    pub anchors: DesignPoints<T>,
    pub values: Vec<T>,
    pub lengthscales: Lengthscales<T>,
    pub chol: CholFactor<T>,
    alpha: Vec<T>,
}

impl<T: Real> GridConditionalPath<T> {
    pub fn new(anchors: DesignPoints<T>, values: Vec<T>, lengthscales: Lengthscales<T>) -> Result<Self> {
        check_dim(lengthscales.dim(), anchors.dim())?;
        check_dim(anchors.len(), values.len())?;
        let k = sqexp_gram(&anchors, &lengthscales)?;
        let chol = cholesky_with_jitter(&k, &default_jitter_schedule(&k))?;
        let alpha = chol.solve(&values)?;
        Ok(Self { anchors, values, lengthscales, chol, alpha })
    }

    /// Draws exact anchor values from `W^A` and interpolates them.
    pub fn sample<R: Rng + ?Sized>(anchors: DesignPoints<T>, lengthscales: Lengthscales<T>, rng: &mut R) -> Result<Self> {
        let k = sqexp_gram(&anchors, &lengthscales)?;
        let chol = cholesky_with_jitter(&k, &default_jitter_schedule(&k))?;
        let values = mvn_sample(&chol, rng);
        let alpha = chol.solve(&values)?;
        Ok(Self { anchors, values, lengthscales, chol, alpha })
    }
}

/// An evaluable GP sample path.
#[derive(Debug, Clone, PartialEq)]
pub enum GpPathRep<T> {
    RandomFeature(RandomFeaturePath<T>),
    GridConditional(GridConditionalPath<T>),
}

impl<T: Real> GpPathRep<T> {
    pub fn dim(&self) -> usize {
        match self {
            GpPathRep::RandomFeature(p) => p.basis.dim(),
            GpPathRep::GridConditional(p) => p.anchors.dim(),
        }
    }

    pub fn lengthscales(&self) -> &Lengthscales<T> {
        match self {
            GpPathRep::RandomFeature(p) => &p.lengthscales,
            GpPathRep::GridConditional(p) => &p.lengthscales,
        }
    }

    /// Unclipped value at `x`.
    pub fn eval(&self, x: &[T]) -> Result<T> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            GpPathRep::RandomFeature(p) => dot(&p.basis.features(x, p.lengthscales.as_slice()), &p.weights),
            GpPathRep::GridConditional(p) => {
                let kernel = SqExp { lengthscales: p.lengthscales.clone() };
                p.anchors.iter().zip(&p.alpha).fold(T::zero(), |acc, (z, &c)| acc + c * kernel.cov(x, z))
            }
        })
    }
}

/// Draws a random-feature path of `W^A` with `m` features.
pub fn rff_path<T: Real>(a: &Lengthscales<T>, m: usize, rng: RngStream) -> GpPathRep<T> {
    rff_path_from(a, m, &mut rng.rng())
}

/// [`rff_path`] drawing from an existing generator: frequencies, then
/// phases, then weights.
pub fn rff_path_from<T: Real, R: Rng + ?Sized>(a: &Lengthscales<T>, m: usize, rng: &mut R) -> GpPathRep<T> {
    let basis = FeatureBasis::draw(m.max(1), a.dim(), rng);
    let weights = (0..basis.len()).map(|_| T::c(rng.sample::<f64, _>(StandardNormal))).collect();
    GpPathRep::RandomFeature(RandomFeaturePath { basis, weights, lengthscales: a.clone() })
}

/// Deterministic evaluation of a path at `x`.
pub fn eval_path<T: Real>(p: &GpPathRep<T>, x: &[T]) -> Result<T> {
    p.eval(x)
}
