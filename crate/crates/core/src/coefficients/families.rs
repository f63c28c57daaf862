use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::CoefficientError;
use crate::grid::{Grid, SpatialDomain};
use crate::noise::JumpCoefficient;

/// `u^p`, with the base clamped at 0 for non-integer `p`.
pub fn power(u: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= 64.0 {
        u.powi(p as i32)
    } else if u <= 0.0 {
        if p > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        u.powf(p)
    }
}

/// Reaction term `f(u, x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    /// `a1 u^β + a2 u`.
    PowerDrift {
        a1: f64,
        a2: f64,
        beta: f64,
    },
    /// `u − u³`.
    AllenCahn,
    /// `u^{1+α}`.
    PurePower {
        alpha: f64,
    },
    Zero,
}

impl DriftSpec {
    pub fn eval(&self, u: f64, _x: &[f64; 3], _t: f64) -> f64 {
        match self {
            DriftSpec::PowerDrift { a1, a2, beta } => a1 * power(u, *beta) + a2 * u,
            DriftSpec::AllenCahn => u - u * u * u,
            DriftSpec::PurePower { alpha } => power(u, 1.0 + alpha),
            DriftSpec::Zero => 0.0,
        }
    }

    /// `(a1, a2, β)` such that `f = a1 u^β + a2 u` holds with equality.
    pub fn power_form(&self) -> Option<(f64, f64, f64)> {
        match self {
            DriftSpec::PowerDrift { a1, a2, beta } => Some((*a1, *a2, *beta)),
            DriftSpec::AllenCahn => Some((-1.0, 1.0, 3.0)),
            DriftSpec::PurePower { alpha } => Some((1.0, 0.0, 1.0 + alpha)),
            DriftSpec::Zero => None,
        }
    }

    pub fn validate(&self) -> Result<(), CoefficientError> {
        match self {
            DriftSpec::PowerDrift { beta, .. } if !(*beta > 1.0) => {
                Err(CoefficientError::OutOfRange {
                    what: "beta",
                    value: *beta,
                    range: "(1, inf)",
                })
            }
            DriftSpec::PurePower { alpha } if !(*alpha > 0.0) => {
                Err(CoefficientError::OutOfRange {
                    what: "alpha",
                    value: *alpha,
                    range: "(0, inf)",
                })
            }
            _ => Ok(()),
        }
    }
}

/// Noise amplitude `σ(u, ∇u, x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    /// `γ0 (u³ + |∇u|²)^{1/2}`.
    GradMixed {
        gamma0: f64,
    },
    /// `μ u^k`.
    Power {
        mu: f64,
        k: f64,
    },
    /// `b u^m`.
    PowerM {
        b: f64,
        m: f64,
    },
    Zero,
}

impl DiffusionSpec {
    pub fn eval(&self, u: f64, grad: &[f64; 3], _x: &[f64; 3], _t: f64) -> f64 {
        match self {
            DiffusionSpec::GradMixed { gamma0 } => {
                let g2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
                gamma0 * (u * u * u + g2).max(0.0).sqrt()
            }
            DiffusionSpec::Power { mu, k } => mu * power(u, *k),
            DiffusionSpec::PowerM { b, m } => b * power(u, *m),
            DiffusionSpec::Zero => 0.0,
        }
    }

    pub fn uses_gradient(&self) -> bool {
        matches!(self, DiffusionSpec::GradMixed { .. })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DiffusionSpec::GradMixed { gamma0 } => *gamma0 == 0.0,
            DiffusionSpec::Power { mu, .. } => *mu == 0.0,
            DiffusionSpec::PowerM { b, .. } => *b == 0.0,
            DiffusionSpec::Zero => true,
        }
    }
}

/// Jump coefficient `φ(u, x, z, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpCoeffSpec {
    /// `c0 z u^n`.
    ZLinearPower {
        c0: f64,
        n: f64,
    },
    Zero,
}

impl JumpCoeffSpec {
    pub fn validate(&self) -> Result<(), CoefficientError> {
        match self {
            JumpCoeffSpec::ZLinearPower { n, .. } if !(*n >= 1.0) => {
                Err(CoefficientError::OutOfRange {
                    what: "n",
                    value: *n,
                    range: "[1, inf)",
                })
            }
            JumpCoeffSpec::ZLinearPower { c0, .. } if !c0.is_finite() => Err(
                CoefficientError::Invalid(format!("c0 must be finite, got {c0}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            JumpCoeffSpec::ZLinearPower { c0, .. } => *c0 == 0.0,
            JumpCoeffSpec::Zero => true,
        }
    }
}

impl JumpCoefficient for JumpCoeffSpec {
    fn phi(&self, u: f64, _x: &[f64; 3], z: f64, _t: f64) -> f64 {
        match self {
            JumpCoeffSpec::ZLinearPower { c0, n } => c0 * z * power(u, *n),
            JumpCoeffSpec::Zero => 0.0,
        }
    }

    fn is_z_linear(&self) -> bool {
        true
    }
}

/// Initial datum `g(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDatum {
    /// `a0 e^{−α|x|}`.
    ExpDecay {
        a0: f64,
        alpha: f64,
    },
    /// Product of half-period sines on intervals and boxes; `sin(πr/R)/(πr/R)` on the ball.
    Bump {
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
    /// `amplitude · φ` with `φ` the normalized principal eigenfunction.
    Principal {
        amplitude: f64,
    },
}

impl InitialDatum {
    pub fn needs_eigenfunction(&self) -> bool {
        matches!(self, InitialDatum::Principal { .. })
    }

    pub fn evaluate(&self, grid: &Grid, phi: Option<&[f64]>) -> Result<Vec<f64>, CoefficientError> {
        let n = grid.len();
        let v = match self {
            InitialDatum::ExpDecay { a0, alpha } => (0..n)
                .map(|i| a0 * (-alpha * grid.radius_of(i)).exp())
                .collect(),
            InitialDatum::Constant { value } => vec![*value; n],
            InitialDatum::Principal { amplitude } => {
                let phi = phi.ok_or_else(|| {
                    CoefficientError::Invalid(
                        "principal initial datum requires the eigenfunction".into(),
                    )
                })?;
                phi.iter().map(|p| amplitude * p).collect()
            }
            InitialDatum::Bump { amplitude } => grid
                .coords()
                .iter()
                .map(|x| amplitude * bump(grid.domain(), x))
                .collect(),
        };
        Ok(v)
    }
}

fn bump(domain: &SpatialDomain, x: &[f64; 3]) -> f64 {
    match domain {
        SpatialDomain::Interval { length } => (PI * x[0] / length).sin(),
        SpatialDomain::Box { sides } => sides
            .iter()
            .enumerate()
            .map(|(k, l)| (PI * x[k] / l).sin())
            .product(),
        SpatialDomain::Ball3dRadial { radius } => {
            let s = PI * x[0] / radius;
            s.sin() / s
        }
    }
}

/// `coef · u^exp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLaw {
    pub coef: f64,
    pub exp: f64,
}

impl PowerLaw {
    pub fn eval(&self, u: f64) -> f64 {
        if self.coef == 0.0 {
            0.0
        } else {
            self.coef * power(u, self.exp)
        }
    }
}

/// `φ0(u, z) = coef · z^{z_exp} · u^{u_exp}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phi0 {
    pub coef: f64,
    pub z_exp: f64,
    pub u_exp: f64,
}

impl Phi0 {
    pub fn eval(&self, u: f64, z: f64) -> f64 {
        self.coef * power(z, self.z_exp) * power(u, self.u_exp)
    }
}

/// Constants whose existence the structural conditions assume.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredConstants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Exponent `μ` of the jump bound `φ² ≤ ψ(z)|u|^μ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PowerLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "G")]
    pub g: Option<PowerLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "K")]
    pub k: Option<PowerLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<PowerLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<Phi0>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "M")]
    pub big_m: Option<f64>,
}

/// Node-wise `f(uᵢ, xᵢ, t)`.
pub fn evaluate_drift(spec: &DriftSpec, u: &[f64], coords: &[[f64; 3]], t: f64, out: &mut [f64]) {
    for ((o, &ui), x) in out.iter_mut().zip(u).zip(coords) {
        *o = spec.eval(ui, x, t);
    }
}

/// Node-wise `σ(uᵢ, (∇u)ᵢ, xᵢ, t)`.
pub fn evaluate_diffusion(
    spec: &DiffusionSpec,
    u: &[f64],
    grad: &[[f64; 3]],
    coords: &[[f64; 3]],
    t: f64,
    out: &mut [f64],
) {
    for (((o, &ui), g), x) in out.iter_mut().zip(u).zip(grad).zip(coords) {
        *o = spec.eval(ui, g, x, t);
    }
}

/// Node-wise `φ(uᵢ, xᵢ, z, t)`.
pub fn evaluate_jump(
    spec: &JumpCoeffSpec,
    u: &[f64],
    coords: &[[f64; 3]],
    z: f64,
    t: f64,
    out: &mut [f64],
) {
    for ((o, &ui), x) in out.iter_mut().zip(u).zip(coords) {
        *o = spec.phi(ui, x, z, t);
    }
}
