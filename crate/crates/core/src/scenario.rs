//! Scenario files and their assembly into a discretized problem.

use serde::{Deserialize, Serialize};

use crate::coefficients::{
    CheckContext, DeclaredConstants, DiffusionSpec, DriftSpec, InitialDatum, JumpCoeffSpec,
};
use crate::error::{Error, ScenarioError};
use crate::grid::{
    assemble_operator, principal_eigenpair, CoefficientField, EigenPair, EllipticOperator, Grid,
    SpatialDomain,
};
use crate::noise::{factor_covariance, CovarianceKernel, JumpMeasure, KernelSpec, LevySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kernel: KernelSpec,
    pub levy: LevySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
}

fn default_theta() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    1e8
}

fn default_checkpoint_every() -> usize {
    100
}

fn default_p_list() -> Vec<f64> {
    vec![1.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    /// Cells per axis.
    pub nodes: usize,
    pub dt: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub t_end: f64,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    /// Steps between recorded checkpoints.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restricted_ball_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub paths: usize,
    pub seed: u64,
}

/// Complete scenario description as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub domain: SpatialDomain,
    #[serde(default)]
    pub operator: CoefficientField,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub jump: JumpCoeffSpec,
    pub noise: NoiseSection,
    pub initial: InitialDatum,
    #[serde(default)]
    pub declared_constants: DeclaredConstants,
    pub integration: IntegrationSection,
    pub monte_carlo: MonteCarloSection,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |s: String| Err(ScenarioError::Invalid(s));
        self.domain
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.drift
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.jump
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let it = &self.integration;
        if !(it.dt > 0.0 && it.dt.is_finite()) {
            return bad(format!("integration.dt must be positive, got {}", it.dt));
        }
        if !(0.0..=1.0).contains(&it.theta) {
            return bad(format!(
                "integration.theta must lie in [0, 1], got {}",
                it.theta
            ));
        }
        if !(it.t_end > 0.0 && it.t_end.is_finite()) {
            return bad(format!(
                "integration.t_end must be positive, got {}",
                it.t_end
            ));
        }
        if !(it.blowup_threshold > 0.0) {
            return bad(format!(
                "integration.blowup_threshold must be positive, got {}",
                it.blowup_threshold
            ));
        }
        if it.checkpoint_every == 0 {
            return bad("integration.checkpoint_every must be at least 1".into());
        }
        if let Some(p) = it.p_list.iter().find(|p| !(**p >= 1.0)) {
            return bad(format!("integration.p_list entries must be >= 1, got {p}"));
        }
        if self.monte_carlo.paths == 0 {
            return bad("monte_carlo.paths must be at least 1".into());
        }
        Ok(())
    }
}

/// Scenario with the grid, operator, eigenpair, jump measure and initial datum assembled.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ScenarioSpec,
    pub grid: Grid,
    pub operator: EllipticOperator,
    pub eig: EigenPair,
    pub jumps: JumpMeasure,
    pub initial: Vec<f64>,
}

impl Problem {
    pub fn assemble(spec: &ScenarioSpec) -> Result<Self, Error> {
        spec.validate()?;
        let (grid, operator) =
            assemble_operator(&spec.domain, &spec.operator, spec.integration.nodes)?;
        let eig = principal_eigenpair(&operator, &grid)?;
        let jumps = JumpMeasure::new(spec.noise.levy.clone(), spec.noise.z_min, spec.noise.z_max)?;
        let initial = spec.initial.evaluate(&grid, Some(&eig.phi))?;
        Ok(Self {
            spec: spec.clone(),
            grid,
            operator,
            eig,
            jumps,
            initial,
        })
    }

    /// Factorizes the spatial covariance of the Wiener noise; fails for indefinite kernels.
    pub fn covariance(&self) -> Result<CovarianceKernel, Error> {
        Ok(factor_covariance(&self.spec.noise.kernel, &self.grid)?)
    }

    pub fn check_context(&self) -> CheckContext<'_> {
        CheckContext {
            grid: &self.grid,
            tensor: &self.spec.operator,
            kernel: &self.spec.noise.kernel,
            jumps: &self.jumps,
            drift: &self.spec.drift,
            diffusion: &self.spec.diffusion,
            jump: &self.spec.jump,
            initial: &self.initial,
            declared: &self.spec.declared_constants,
        }
    }

    /// `(g, φ)`.
    pub fn initial_projection(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.initial)
            .zip(&self.eig.phi)
            .map(|((w, g), p)| w * g * p)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = r#"
[domain]
kind = "interval"
length = 1.0

[drift]
kind = "zero"

[diffusion]
kind = "zero"

[jump]
kind = "zero"

[noise]
kernel = { kind = "zero" }
levy = { kind = "zero" }

[initial]
kind = "bump"
amplitude = 1.0

[integration]
nodes = 64
dt = 1e-4
t_end = 0.1

[monte_carlo]
paths = 2
seed = 7
"#;

    #[test]
    fn parses_and_round_trips() {
        let spec = ScenarioSpec::from_toml(HEAT).unwrap();
        assert_eq!(spec.integration.theta, 1.0);
        assert_eq!(spec.operator, CoefficientField::Laplacian { scale: 1.0 });
        let again = ScenarioSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = HEAT.replace("t_end = 0.1", "t_end = 0.1\nt_ned = 0.2");
        let err = ScenarioSpec::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("t_ned"), "{err}");
    }

    #[test]
    fn missing_fields_are_named() {
        let text = HEAT.replace("dt = 1e-4\n", "");
        let err = ScenarioSpec::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        let text = HEAT.replace("dt = 1e-4", "dt = -1.0");
        assert!(matches!(
            ScenarioSpec::from_toml(&text),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn assembles_heat_problem() {
        let p = Problem::assemble(&ScenarioSpec::from_toml(HEAT).unwrap()).unwrap();
        assert_eq!(p.grid.len(), 64);
        assert!((p.eig.lambda1 - std::f64::consts::PI.powi(2)).abs() < 0.01);
        assert!(p.initial_projection() > 0.0);
        assert_eq!(p.covariance().unwrap().rank(), 0);
    }
}
