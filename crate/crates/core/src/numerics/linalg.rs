//! Small dense linear algebra: enough to factor and sample from covariance
//! matrices of a few thousand points.

use crate::error::{Error, Result};
use crate::scalar::Real;
use rand::Rng;
use rand_distr::StandardNormal;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, got: bad.len() });
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// A square matrix whose stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix<T>(Matrix<T>);

impl<T: Real> PsdMatrix<T> {
    /// Wraps `m`, rejecting non-square or asymmetric input.
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch { expected: m.rows, got: m.cols });
        }
        for i in 0..m.rows {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::DomainError(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(m))
    }

    /// Builds a symmetric matrix from the lower triangle produced by `f`.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    pub fn mean_diagonal(&self) -> T {
        let n = self.dim();
        if n == 0 {
            return T::zero();
        }
        (0..n).map(|i| self.0[(i, i)]).sum::<T>() / T::c(n as f64)
    }
}

/// Lower-triangular Cholesky factor together with the diagonal jitter that
/// was needed to obtain it.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor<T> {
    pub l: Matrix<T>,
    pub jitter_used: T,
}

impl<T: Real> CholFactor<T> {
    pub fn dim(&self) -> usize {
        self.l.rows
    }

    /// L * z
    pub fn mul_lower(&self, z: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n).map(|i| dot(&self.l.row(i)[..=i], &z[..=i])).collect()
    }

    /// Solves L x = b.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves Lᵀ x = b.
    pub fn solve_upper(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves (L Lᵀ) x = b.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: b.len() });
        }
        Ok(self.solve_upper(&self.solve_lower(b)))
    }

    pub fn log_det(&self) -> T {
        let two = T::c(2.0);
        (0..self.dim()).map(|i| two * self.l[(i, i)].ln()).sum()
    }

    /// L Lᵀ
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.l.row(i)[..=j], &self.l.row(j)[..=j]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

/// Jitter schedule `{0, 1e-10, 1e-8, 1e-6}` scaled by the mean diagonal.
pub fn default_jitter_schedule<T: Real>(m: &PsdMatrix<T>) -> Vec<T> {
    let scale = m.mean_diagonal().max(T::min_positive_value());
    [0.0, 1e-10, 1e-8, 1e-6].iter().map(|&j| T::c(j) * scale).collect()
}

fn try_cholesky<T: Real>(m: &Matrix<T>, jitter: T) -> Option<Matrix<T>> {
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let ljrow = &l.data[j * n..j * n + j];
        let d = m[(j, j)] + jitter - dot(ljrow, ljrow);
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let s = m[(i, j)] - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Cholesky factorization, retrying with each diagonal jitter in
/// `jitter_schedule` (absolute values, ascending) until one succeeds.
pub fn cholesky_with_jitter<T: Real>(m: &PsdMatrix<T>, jitter_schedule: &[T]) -> Result<CholFactor<T>> {
    if m.dim() == 0 {
        return Ok(CholFactor { l: Matrix::zeros(0, 0), jitter_used: T::zero() });
    }
    for &jitter in jitter_schedule {
        if let Some(l) = try_cholesky(m.matrix(), jitter) {
            return Ok(CholFactor { l, jitter_used: jitter });
        }
    }
    Err(Error::FactorizationFailed {
        last_jitter: jitter_schedule.last().map_or(0.0, |j| j.as_f64()),
    })
}

/// Draws `L z` with `z` standard normal.
pub fn mvn_sample<T: Real, R: Rng + ?Sized>(chol: &CholFactor<T>, rng: &mut R) -> Vec<T> {
    let z: Vec<T> = (0..chol.dim()).map(|_| T::c(rng.sample::<f64, _>(StandardNormal))).collect();
    chol.mul_lower(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngStream;
    use proptest::prelude::*;

    fn psd(rows: &[Vec<f64>]) -> PsdMatrix<f64> {
        PsdMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn identity_factor() {
        let m = PsdMatrix::new(Matrix::<f64>::identity(3)).unwrap();
        let c = cholesky_with_jitter(&m, &[0.0]).unwrap();
        assert_eq!(c.l, Matrix::identity(3));
        assert_eq!(c.jitter_used, 0.0);
    }

    #[test]
    fn two_by_two_factor() {
        let c = cholesky_with_jitter(&psd(&[vec![2.0, 1.0], vec![1.0, 2.0]]), &[0.0]).unwrap();
        let expect = [[2f64.sqrt(), 0.0], [1.0 / 2f64.sqrt(), 1.5f64.sqrt()]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.l[(i, j)] - expect[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn indefinite_matrix_fails() {
        let err = cholesky_with_jitter(&psd(&[vec![1.0, 2.0], vec![2.0, 1.0]]), &[0.0, 1e-10]).unwrap_err();
        assert!(matches!(err, Error::FactorizationFailed { .. }));
    }

    #[test]
    fn asymmetric_rejected() {
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
        assert!(PsdMatrix::new(m).is_err());
    }

    #[test]
    fn singular_matrix_uses_jitter() {
        let m = PsdMatrix::from_lower_fn(4, |_, _| 1.0f64);
        let c = cholesky_with_jitter(&m, &default_jitter_schedule(&m)).unwrap();
        assert!(c.jitter_used > 0.0);
    }

    #[test]
    fn solve_roundtrip() {
        let m = psd(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]]);
        let c = cholesky_with_jitter(&m, &[0.0]).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b).unwrap();
        let back = m.matrix().matvec(&x).unwrap();
        for (u, v) in back.iter().zip(b) {
            assert!((u - v).abs() < 1e-12);
        }
        let det = 4.0 * (3.0 * 2.0 - 0.04) - 1.0 * (2.0 - 0.1) + 0.5 * (0.2 - 1.5);
        assert!((c.log_det() - f64::ln(det)).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_sample_is_zero() {
        let m = PsdMatrix::from_lower_fn(3, |_, _| 0.0f64);
        let c = cholesky_with_jitter(&m, &[0.0, 1e-300]).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        let x = mvn_sample(&c, &mut rng);
        assert!(x.iter().all(|v| v.abs() < 1e-140));
    }

    #[test]
    fn sample_is_reproducible() {
        let c = cholesky_with_jitter(&PsdMatrix::new(Matrix::<f64>::identity(2)).unwrap(), &[0.0]).unwrap();
        let a = mvn_sample(&c, &mut RngStream::new(5, 9).rng());
        let b = mvn_sample(&c, &mut RngStream::new(5, 9).rng());
        assert_eq!(a, b);
    }

    #[test]
    fn sample_covariance_matches() {
        let m = psd(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let c = cholesky_with_jitter(&m, &[0.0]).unwrap();
        let mut rng = RngStream::new(42, 0).rng();
        let n = 100_000;
        let mut s = [[0.0f64; 2]; 2];
        for _ in 0..n {
            let x = mvn_sample(&c, &mut rng);
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] += x[i] * x[j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let cov = s[i][j] / n as f64;
                let target = m.matrix()[(i, j)];
                assert!((cov - target).abs() <= 0.05 * target, "cov[{i}][{j}] = {cov}");
            }
        }
    }

    #[test]
    fn single_precision_factor() {
        let m = PsdMatrix::new(Matrix::<f32>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()).unwrap();
        let c = cholesky_with_jitter(&m, &[0.0]).unwrap();
        assert!((c.l[(1, 1)] - 1.5f32.sqrt()).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn factor_reconstructs(n in 1usize..12, seed in any::<u64>(), eps in 1e-6f64..1.0) {
            use rand::Rng;
            let mut rng = RngStream::new(seed, 0).rng();
            let a = Matrix::from_fn(n + 2, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let ata = a.transpose().matmul(&a).unwrap();
            let m = PsdMatrix::from_lower_fn(n, |i, j| ata[(i, j)] + if i == j { eps } else { 0.0 });
            let c = cholesky_with_jitter(&m, &default_jitter_schedule(&m)).unwrap();
            let rec = c.reconstruct();
            let diff = Matrix::from_fn(n, n, |i, j| {
                rec[(i, j)] - m.matrix()[(i, j)] - if i == j { c.jitter_used } else { 0.0 }
            });
            prop_assert!(diff.frobenius_norm() / m.matrix().frobenius_norm() <= 1e-8);
        }
    }
}
