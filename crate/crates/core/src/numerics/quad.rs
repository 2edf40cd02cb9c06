//! Globally adaptive Gauss–Kronrod (7/15) quadrature with interval bisection.

use crate::error::{Error, Result};
use crate::scalar::Real;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

struct Piece<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

impl<T: Real> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T: Real> Eq for Piece<T> {}
impl<T: Real> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

fn gk15<T: Real>(f: &mut impl FnMut(T) -> T, a: T, b: T) -> (T, T) {
    let half = T::c(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let fc = f(center);
    let mut kron = fc * T::c(WGK[7]);
    let mut gauss = fc * T::c(WG[3]);
    for i in 0..7 {
        let dx = h * T::c(XGK[i]);
        let s = f(center - dx) + f(center + dx);
        kron = kron + T::c(WGK[i]) * s;
        if i % 2 == 1 {
            gauss = gauss + T::c(WG[i / 2]) * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// ∫ₐᵇ f(x) dx to absolute accuracy `tol`.
///
/// Integrable endpoint singularities are handled by repeated bisection of
/// the interval with the largest error estimate; Kronrod nodes never touch the
/// endpoints.
pub fn quad_1d<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    if b < a {
        return quad_1d(f, b, a, tol).map(|v| -v);
    }
    let (value, err) = gk15(&mut f, a, b);
    if !value.is_finite() {
        return Err(nonconvergent(a, b, err));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    let floor = T::c(50.0) * T::epsilon();
    while total_err > tol.max(floor * total.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(nonconvergent(a, b, total_err));
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = T::c(0.5) * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(nonconvergent(a, b, total_err));
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        if !(v1 + v2).is_finite() {
            return Err(nonconvergent(a, b, total_err));
        }
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.err + e1 + e2;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2 });
        // recompute occasionally to flush cancellation in the running sums
        if heap.len() % 256 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    Ok(heap.iter().map(|p| p.value).sum())
}

/// ∫ₐ^∞ f(x) dx via the map x = a + t/(1 − t).
pub fn quad_semi_infinite<T: Real>(mut f: impl FnMut(T) -> T, a: T, tol: T) -> Result<T> {
    let one = T::one();
    quad_1d(
        move |t: T| {
            let s = one - t;
            let x = a + t / s;
            if !x.is_finite() {
                return T::zero();
            }
            let v = f(x) / (s * s);
            if v.is_finite() { v } else { T::zero() }
        },
        T::zero(),
        one,
        tol,
    )
}

/// ∫₀^∞ f(x) dx.
pub fn quad_0_inf<T: Real>(f: impl FnMut(T) -> T, tol: T) -> Result<T> {
    quad_semi_infinite(f, T::zero(), tol)
}

fn nonconvergent<T: Real>(a: T, b: T, err: T) -> Error {
    Error::QuadNonConvergent { a: a.as_f64(), b: b.as_f64(), err: err.as_f64() }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// E₁(x) by its convergent power series; independent of the library's E₁.
    fn e1_series(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            sum += term / k as f64;
        }
        -0.577_215_664_901_532_9 - x.ln() - sum
    }

    #[test]
    fn constant() {
        assert!((quad_1d(|_: f64| 1.0, 0.0, 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn odd_symmetry() {
        assert!(quad_1d(|x: f64| x, -1.0, 1.0, 1e-12).unwrap().abs() < 1e-12);
    }

    #[test]
    fn exponential_integral_tail() {
        let expected = e1_series(1.0);
        assert!((expected - 0.219_383_934_395_520_3).abs() < 1e-12);
        let v = quad_semi_infinite(|x: f64| (-x).exp() / x, 1.0, 1e-10).unwrap();
        assert!((v - expected).abs() < 1e-9, "{v}");
    }

    #[test]
    fn normal_density_integrates_to_one() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = quad_1d(phi, -8.0, 8.0, 1e-12).unwrap();
        // mass outside ±8 is ~1.2e-15
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_endpoint_singularity() {
        // ∫₀¹ -ln x dx = 1
        let v = quad_1d(|x: f64| -x.ln(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        // ∫₀¹ x^{-1/2} dx = 2
        let v = quad_1d(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-8).unwrap();
        assert!((v - 2.0).abs() < 1e-7);
    }

    #[test]
    fn reversed_limits() {
        let v = quad_1d(|x: f64| x * x, 1.0, 0.0, 1e-12).unwrap();
        assert!((v + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn divergent_integral_reports_error() {
        let r = quad_1d(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::QuadNonConvergent { .. })));
    }

    #[test]
    fn single_precision() {
        let v = quad_1d(|x: f32| x.cos(), 0.0, std::f32::consts::FRAC_PI_2, 1e-5).unwrap();
        assert!((v - 1.0).abs() < 1e-5);
    }
}
