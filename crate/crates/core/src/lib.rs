#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod blowup;
pub mod coefficients;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod lyapunov;
pub mod noise;
pub mod scenario;

pub use error::{Error, Result};
pub use grid::{EigenPair, EllipticOperator, Grid, GridField, SpatialDomain};
pub use integrator::{EnsembleResult, PathResult, Scheme, SchemeConfig};
pub use scenario::{Problem, ScenarioSpec};
