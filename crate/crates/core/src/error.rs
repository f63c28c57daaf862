use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("at least {min} nodes per axis required, got {got}")]
    TooFewNodes { got: usize, min: usize },
    #[error("coefficient matrix not symmetric at node {node} (x = {x:?}): a[{i}][{j}] = {aij}, a[{j}][{i}] = {aji}")]
    NonSymmetricCoefficient {
        node: usize,
        x: [f64; 3],
        i: usize,
        j: usize,
        aij: f64,
        aji: f64,
    },
    #[error("coefficient matrix not uniformly elliptic at node {node} (x = {x:?}): smallest eigenvalue {min_eigenvalue}")]
    NonElliptic {
        node: usize,
        x: [f64; 3],
        min_eigenvalue: f64,
    },
    #[error("matrix not positive definite: pivot {pivot} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error(
        "inverse iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("principal eigenvector changes sign: phi[{node}] = {value:e} with max {max:e}")]
    NotOneSigned { node: usize, value: f64, max: f64 },
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("norm exponent must be >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("restricted ball: {0}")]
    RestrictedBall(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("covariance kernel not symmetric at node pair ({i}, {j}): {qij} vs {qji}")]
    NonSymmetricKernel {
        i: usize,
        j: usize,
        qij: f64,
        qji: f64,
    },
    #[error("covariance matrix is indefinite: most negative eigenvalue {min_eigenvalue:e} (largest {max_eigenvalue:e})")]
    Indefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },
    #[error("invalid jump measure: {0}")]
    InvalidMeasure(String),
    #[error("jump coefficient integrand not finite at node {node}, z = {z}")]
    NonFiniteIntegrand { node: usize, z: f64 },
    #[error("time step must be >= 0, got {0}")]
    InvalidTimeStep(f64),
    #[error("kernel '{kernel}' is not defined on this domain: {reason}")]
    UnsupportedKernel { kernel: String, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoefficientError {
    #[error("{what} = {value} outside admissible range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("invalid coefficient family: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlowupError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bound not applicable: {reason}")]
    NotApplicable {
        reason: String,
        witness: Option<f64>,
    },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("linear solve failed: {0}")]
    Solve(#[from] GridError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("inner ball of radius {inner} is not contained in the domain (radius {outer})")]
    InnerBall { inner: f64, outer: f64 },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown canned scenario '{0}'")]
    UnknownCanned(String),
}

/// Crate-wide error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error(transparent)]
    Blowup(#[from] BlowupError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
