//! Semi-implicit Euler–Maruyama integration with jumps, sample paths and Monte Carlo ensembles.

mod ensemble;
mod path;
mod scheme;

pub(crate) use ensemble::pool;

pub use ensemble::{run_ensemble, simulate_paths, EnsembleResult, EnsembleRow};
pub use path::{
    functional_names, restricted_ball_functionals, simulate_path, simulate_path_observed,
    InnerBall, PathResult, RestrictedFunctionals,
};
pub use scheme::{PathState, Scheme, SchemeConfig, StepOutcome, Workspace};
