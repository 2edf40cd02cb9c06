//! Deep horseshoe Gaussian process (Deep-HGP) priors for nonparametric
//! regression, their fractional and standard posteriors, and the diagnostic
//! machinery used to check contraction rates empirically.
//!
//! The numerical core ([`numerics`], [`kernels`]) is generic over the scalar
//! type through [`Real`]; the statistical layers work in `f64`, and the
//! aliases at the crate root name the concrete types used throughout.

pub mod analysis;
pub mod error;
pub mod inference;
pub mod kernels;
pub mod numerics;
pub mod priors;
pub mod scalar;
pub mod truth;

pub use error::{Error, Result};
pub use numerics::rng::RngStream;
pub use scalar::Real;

/// Inverse-bandwidths in double precision.
pub type Lengthscales = kernels::Lengthscales<f64>;
/// Design points in double precision.
pub type DesignPoints = kernels::DesignPoints<f64>;
/// Dense matrix in double precision.
pub type Matrix = numerics::linalg::Matrix<f64>;
/// Symmetric covariance matrix in double precision.
pub type PsdMatrix = numerics::linalg::PsdMatrix<f64>;
/// Cholesky factor in double precision.
pub type CholFactor = numerics::linalg::CholFactor<f64>;
/// Sample-path representation in double precision.
pub type GpPathRep = kernels::GpPathRep<f64>;

/// Single-precision variants of the generic numerical types.
pub mod f32 {
    pub type Lengthscales = crate::kernels::Lengthscales<f32>;
    pub type DesignPoints = crate::kernels::DesignPoints<f32>;
    pub type Matrix = crate::numerics::linalg::Matrix<f32>;
    pub type PsdMatrix = crate::numerics::linalg::PsdMatrix<f32>;
    pub type CholFactor = crate::numerics::linalg::CholFactor<f32>;
    pub type GpPathRep = crate::kernels::GpPathRep<f32>;
}
