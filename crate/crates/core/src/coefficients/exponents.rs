use serde::{Deserialize, Serialize};

use crate::error::CoefficientError;

/// Exponent `α` with the Lebesgue triple `(r, p, q)` it interpolates:
/// `1/r = α/p + (1 − α)/q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationExponents {
    pub alpha: f64,
    pub r: f64,
    pub p: f64,
    pub q: f64,
}

impl InterpolationExponents {
    /// `|1/r − α/p − (1 − α)/q|`.
    pub fn identity_residual(&self) -> f64 {
        (1.0 / self.r - self.alpha / self.p - (1.0 - self.alpha) / self.q).abs()
    }
}

/// `α = 2(β + 1 − m) / (m(β − 1))` for `‖v‖_m ≤ ‖v‖_2^α ‖v‖_{β+1}^{1−α}`, requiring `2 < m < β + 1`.
pub fn interpolation_exponents(
    m: f64,
    beta: f64,
) -> Result<InterpolationExponents, CoefficientError> {
    if !(beta > 1.0) {
        return Err(CoefficientError::OutOfRange {
            what: "beta",
            value: beta,
            range: "(1, inf)",
        });
    }
    if !(m > 2.0 && m < beta + 1.0) {
        return Err(CoefficientError::OutOfRange {
            what: "m",
            value: m,
            range: "(2, beta + 1)",
        });
    }
    Ok(InterpolationExponents {
        alpha: 2.0 * (beta + 1.0 - m) / (m * (beta - 1.0)),
        r: m,
        p: 2.0,
        q: beta + 1.0,
    })
}

/// `α = (2 − m)/m` for `‖v‖_{2m} ≤ ‖v‖_2^α ‖v‖_4^{1−α}`, requiring `1 < m < 2`.
pub fn young_exponents(m: f64) -> Result<InterpolationExponents, CoefficientError> {
    if !(m > 1.0 && m < 2.0) {
        return Err(CoefficientError::OutOfRange {
            what: "m",
            value: m,
            range: "(1, 2)",
        });
    }
    Ok(InterpolationExponents {
        alpha: (2.0 - m) / m,
        r: 2.0 * m,
        p: 2.0,
        q: 4.0,
    })
}
