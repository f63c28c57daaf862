use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// Smallest admissible node count per axis.
pub const MIN_NODES: usize = 8;

/// Spatial domain with homogeneous Dirichlet boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialDomain {
    Interval {
        length: f64,
    },
    Box {
        sides: Vec<f64>,
    },
    /// Ball in ℝ³ reduced to the radial coordinate on (0, R).
    Ball3dRadial {
        radius: f64,
    },
}

impl SpatialDomain {
    pub fn validate(&self) -> Result<(), GridError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GridError::InvalidDomain(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        match self {
            SpatialDomain::Interval { length } => positive("length", *length),
            SpatialDomain::Ball3dRadial { radius } => positive("radius", *radius),
            SpatialDomain::Box { sides } => {
                if sides.is_empty() || sides.len() > 3 {
                    return Err(GridError::InvalidDomain(format!(
                        "box dimension must be 1, 2 or 3, got {}",
                        sides.len()
                    )));
                }
                sides.iter().try_for_each(|s| positive("side length", *s))
            }
        }
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        match self {
            SpatialDomain::Interval { length } => *length,
            SpatialDomain::Box { sides } => sides.iter().product(),
            SpatialDomain::Ball3dRadial { radius } => 4.0 / 3.0 * PI * radius.powi(3),
        }
    }

    /// Number of gradient components carried by the discretization.
    pub fn gradient_dim(&self) -> usize {
        match self {
            SpatialDomain::Box { sides } => sides.len(),
            _ => 1,
        }
    }
}

/// Cell-centred grid of interior nodes.
///
/// Each node sits at the centre of a cell; Dirichlet data live on the cell
/// faces that touch the boundary. Weights are exact cell volumes, so
/// `Σ w` equals the domain measure up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: SpatialDomain,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    coords: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl Grid {
    /// Builds the grid with `n` cells per axis.
    pub fn new(domain: &SpatialDomain, n: usize) -> Result<Self, GridError> {
        domain.validate()?;
        if n < MIN_NODES {
            return Err(GridError::TooFewNodes {
                got: n,
                min: MIN_NODES,
            });
        }
        let centre = |i: usize, h: f64| (i as f64 + 0.5) * h;
        let grid = match domain {
            SpatialDomain::Interval { length } => {
                let h = length / n as f64;
                Grid {
                    domain: domain.clone(),
                    shape: vec![n],
                    spacing: vec![h],
                    coords: (0..n).map(|i| [centre(i, h), 0.0, 0.0]).collect(),
                    weights: vec![h; n],
                }
            }
            SpatialDomain::Ball3dRadial { radius } => {
                let h = radius / n as f64;
                let shell = |i: usize| {
                    let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                    4.0 / 3.0 * PI * (b.powi(3) - a.powi(3))
                };
                Grid {
                    domain: domain.clone(),
                    shape: vec![n],
                    spacing: vec![h],
                    coords: (0..n).map(|i| [centre(i, h), 0.0, 0.0]).collect(),
                    weights: (0..n).map(shell).collect(),
                }
            }
            SpatialDomain::Box { sides } => {
                let d = sides.len();
                let shape = vec![n; d];
                let spacing: Vec<f64> = sides.iter().map(|s| s / n as f64).collect();
                let total = n.pow(d as u32);
                let volume: f64 = spacing.iter().product();
                let mut coords = Vec::with_capacity(total);
                for flat in 0..total {
                    let mut x = [0.0; 3];
                    let mut rem = flat;
                    for (axis, h) in spacing.iter().enumerate() {
                        x[axis] = centre(rem % n, *h);
                        rem /= n;
                    }
                    coords.push(x);
                }
                Grid {
                    domain: domain.clone(),
                    shape,
                    spacing,
                    coords,
                    weights: vec![volume; total],
                }
            }
        };
        Ok(grid)
    }

    pub fn domain(&self) -> &SpatialDomain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Physical node coordinates; radial nodes are placed on the ray `(r, 0, 0)`.
    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.domain, SpatialDomain::Ball3dRadial { .. })
    }

    /// Euclidean distance of node `i` from the origin.
    pub fn radius_of(&self, i: usize) -> f64 {
        let x = self.coords[i];
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Stride of `axis` in the flat node ordering (axis 0 fastest).
    pub fn stride(&self, axis: usize) -> usize {
        self.shape[..axis].iter().product()
    }

    /// Multi-index of a flat node index.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rem = flat;
        for (axis, n) in self.shape.iter().enumerate() {
            idx[axis] = rem % n;
            rem /= n;
        }
        idx
    }

    pub(crate) fn check_len(&self, v: &[f64]) -> Result<(), GridError> {
        if v.len() == self.len() {
            Ok(())
        } else {
            Err(GridError::LengthMismatch {
                expected: self.len(),
                got: v.len(),
            })
        }
    }
}
