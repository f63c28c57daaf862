//! Correlated Wiener increments, compensated Poisson jumps and per-path random streams.

mod gauss_legendre;
mod jump;
mod kernel;
mod rng;

pub use gauss_legendre::{gauss_legendre, GL_POINTS};
pub use jump::{
    compensator_field, sample_jumps, JumpCoefficient, JumpMeasure, LevySpec, M2_CAPTURE,
};
pub use kernel::{
    factor_covariance, sample_wiener_increment, CovarianceFn, CovarianceKernel, KernelSpec,
};
pub use rng::RngStream;
