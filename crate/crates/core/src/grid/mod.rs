//! Spatial grids, the discrete elliptic operator and its principal eigenpair.

mod banded;
mod domain;
mod eigen;
mod operator;
mod ops;

pub use banded::{BandedCholesky, BandedSym};
pub use domain::{Grid, SpatialDomain, MIN_NODES};
pub use eigen::{principal_eigenpair, EigenPair};
pub use operator::{assemble_operator, CoefficientField, DiffusionTensor, EllipticOperator};
pub use ops::{discrete_gradient, lp_norm, quadrature};

#[allow(unused_imports)]
pub(crate) use ops::{discrete_gradient_into, weighted_lp};

/// Field of nodal values on a [`Grid`].
pub type GridField = Vec<f64>;
