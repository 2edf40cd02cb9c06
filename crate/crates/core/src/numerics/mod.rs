//! Seeded random streams, dense positive-semidefinite linear algebra,
//! adaptive quadrature and the handful of special functions the priors need.

pub mod linalg;
pub mod quad;
pub mod rng;
pub mod special;

pub use linalg::{cholesky_with_jitter, default_jitter_schedule, mvn_sample, CholFactor, Matrix, PsdMatrix};
pub use quad::{quad_0_inf, quad_1d, quad_semi_infinite};
pub use rng::RngStream;
