//! Flux-form finite-difference discretization of `A = Σ ∂ᵢ(a_ij ∂ⱼ)`.
//!
//! The operator is stored through its symmetric stiffness matrix `K` in the
//! weighted inner product: `A_h = −W⁻¹ K` with `W = diag(weights)`. On the
//! uniform interval and box grids `W` is a multiple of the identity, so
//! `A_h` itself is symmetric; on the radial grid `A_h` is self-adjoint with
//! respect to the shell-volume weights.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::banded::{BandedCholesky, BandedSym};
use super::domain::{Grid, SpatialDomain};
use crate::error::GridError;

/// Matrix-valued coefficient `x ↦ a(x)`; only the leading `d × d` block is used.
pub trait DiffusionTensor: Sync {
    fn tensor(&self, x: &[f64; 3]) -> [[f64; 3]; 3];
}

impl<F> DiffusionTensor for F
where
    F: Fn(&[f64; 3]) -> [[f64; 3]; 3] + Sync,
{
    fn tensor(&self, x: &[f64; 3]) -> [[f64; 3]; 3] {
        self(x)
    }
}

/// Coefficient families available from scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientField {
    /// `a = scale · I`.
    Laplacian { scale: f64 },
    /// Constant symmetric matrix (`d × d`).
    Constant { matrix: Vec<Vec<f64>> },
    /// Isotropic `a(x) = (a0 + a1·x₀) I`, with `x₀` the first coordinate (or `r`).
    Affine { a0: f64, a1: f64 },
}

impl Default for CoefficientField {
    fn default() -> Self {
        CoefficientField::Laplacian { scale: 1.0 }
    }
}

impl DiffusionTensor for CoefficientField {
    fn tensor(&self, x: &[f64; 3]) -> [[f64; 3]; 3] {
        let mut a = [[0.0; 3]; 3];
        match self {
            CoefficientField::Laplacian { scale } => {
                (0..3).for_each(|i| a[i][i] = *scale);
            }
            CoefficientField::Affine { a0, a1 } => {
                let s = a0 + a1 * x[0];
                (0..3).for_each(|i| a[i][i] = s);
            }
            CoefficientField::Constant { matrix } => {
                for (i, row) in matrix.iter().enumerate().take(3) {
                    for (j, v) in row.iter().enumerate().take(3) {
                        a[i][j] = *v;
                    }
                }
            }
        }
        a
    }
}

/// Discrete elliptic operator on the interior nodes.
#[derive(Debug, Clone)]
pub struct EllipticOperator {
    stiffness: BandedSym,
    weights: Vec<f64>,
    factor: BandedCholesky,
    ellipticity: f64,
    asymmetry: f64,
}

impl EllipticOperator {
    /// Symmetric positive definite stiffness matrix `K = −W A_h`.
    pub fn stiffness(&self) -> &BandedSym {
        &self.stiffness
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Smallest eigenvalue of `a(x)` over the sampled nodes.
    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    /// `max|K − Kᵀ| / max|K|` of the raw assembly, before symmetrization.
    pub fn assembly_asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub(crate) fn factor(&self) -> &BandedCholesky {
        &self.factor
    }

    /// `out = A_h v = −W⁻¹ K v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.stiffness.matvec(v, out);
        out.iter_mut()
            .zip(&self.weights)
            .for_each(|(o, w)| *o = -*o / w);
    }

    /// Discrete Dirichlet energy `vᵀ K v`, the analogue of `∫ ∇vᵀ a ∇v`.
    pub fn dirichlet_energy(&self, v: &[f64]) -> f64 {
        self.stiffness.quadratic_form(v)
    }
}

/// Assembles the grid and the discrete operator.
pub fn assemble_operator(
    domain: &SpatialDomain,
    coeffs: &dyn DiffusionTensor,
    n: usize,
) -> Result<(Grid, EllipticOperator), GridError> {
    let grid = Grid::new(domain, n)?;
    let d = domain.gradient_dim();
    let ellipticity = check_coefficients(&grid, coeffs, d)?;

    let mut raw: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut add = |i: usize, j: usize, v: f64| *raw.entry((i, j)).or_insert(0.0) += v;

    match domain {
        SpatialDomain::Interval { length } => {
            let h = grid.spacing()[0];
            let a = |x: f64| coeffs.tensor(&[x, 0.0, 0.0])[0][0];
            for i in 0..n - 1 {
                let c = a((i + 1) as f64 * h) / h;
                add(i, i, c);
                add(i + 1, i + 1, c);
                add(i, i + 1, -c);
                add(i + 1, i, -c);
            }
            add(0, 0, 2.0 * a(0.0) / h);
            add(n - 1, n - 1, 2.0 * a(*length) / h);
        }
        SpatialDomain::Ball3dRadial { radius } => {
            let h = grid.spacing()[0];
            let a = |r: f64| coeffs.tensor(&[r, 0.0, 0.0])[0][0];
            // The face at r = 0 has zero area and contributes nothing.
            for i in 0..n - 1 {
                let r = (i + 1) as f64 * h;
                let c = a(r) * 4.0 * PI * r * r / h;
                add(i, i, c);
                add(i + 1, i + 1, c);
                add(i, i + 1, -c);
                add(i + 1, i, -c);
            }
            add(
                n - 1,
                n - 1,
                2.0 * a(*radius) * 4.0 * PI * radius * radius / h,
            );
        }
        SpatialDomain::Box { .. } => assemble_box(&grid, coeffs, &mut add),
    }

    let scale = raw.values().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut asym = 0.0_f64;
    let mut bw = 0;
    for (&(i, j), v) in &raw {
        bw = bw.max(i.abs_diff(j));
        let t = raw.get(&(j, i)).copied().unwrap_or(0.0);
        asym = asym.max((v - t).abs());
    }
    let mut stiffness = BandedSym::zeros(grid.len(), bw);
    for (&(i, j), v) in &raw {
        if i >= j {
            let t = raw.get(&(j, i)).copied().unwrap_or(0.0);
            stiffness.set(i, j, 0.5 * (v + t));
        } else if !raw.contains_key(&(j, i)) {
            stiffness.set(i, j, 0.5 * v);
        }
    }
    let factor = stiffness.cholesky()?;
    let weights = grid.weights().to_vec();
    Ok((
        grid,
        EllipticOperator {
            stiffness,
            weights,
            factor,
            ellipticity,
            asymmetry: if scale > 0.0 { asym / scale } else { 0.0 },
        },
    ))
}

fn assemble_box(grid: &Grid, coeffs: &dyn DiffusionTensor, add: &mut dyn FnMut(usize, usize, f64)) {
    let shape = grid.shape().to_vec();
    let d = shape.len();
    let h = grid.spacing().to_vec();
    let volume: f64 = h.iter().product();
    let centre = |idx: &[isize; 3]| {
        let mut x = [0.0; 3];
        for axis in 0..d {
            x[axis] = (idx[axis] as f64 + 0.5) * h[axis];
        }
        x
    };
    let flat = |idx: &[isize; 3]| -> Option<usize> {
        let mut f = 0;
        let mut stride = 1;
        for axis in 0..d {
            let k = idx[axis];
            if k < 0 || k >= shape[axis] as isize {
                return None;
            }
            f += k as usize * stride;
            stride *= shape[axis];
        }
        Some(f)
    };

    // Diagonal terms through face fluxes.
    for node in 0..grid.len() {
        let m = grid.multi_index(node);
        let idx = [m[0] as isize, m[1] as isize, m[2] as isize];
        for axis in 0..d {
            let mut x = centre(&idx);
            x[axis] += 0.5 * h[axis];
            let a = coeffs.tensor(&x)[axis][axis];
            let c = a * volume / (h[axis] * h[axis]);
            let mut next = idx;
            next[axis] += 1;
            match flat(&next) {
                Some(j) => {
                    add(node, node, c);
                    add(j, j, c);
                    add(node, j, -c);
                    add(j, node, -c);
                }
                None => add(node, node, 2.0 * c),
            }
            if idx[axis] == 0 {
                let mut x0 = centre(&idx);
                x0[axis] -= 0.5 * h[axis];
                let a0 = coeffs.tensor(&x0)[axis][axis];
                add(node, node, 2.0 * a0 * volume / (h[axis] * h[axis]));
            }
        }
    }

    // Mixed terms on plaquettes; corners outside the domain carry zero.
    for p in 0..d {
        for q in p + 1..d {
            let mut ranges = [(0isize, 1isize); 3];
            for axis in 0..d {
                ranges[axis] = if axis == p || axis == q {
                    (-1, shape[axis] as isize)
                } else {
                    (0, shape[axis] as isize)
                };
            }
            for i2 in ranges[2].0..ranges[2].1 {
                for i1 in ranges[1].0..ranges[1].1 {
                    for i0 in ranges[0].0..ranges[0].1 {
                        let base = [i0, i1, i2];
                        let mut x = centre(&base);
                        x[p] += 0.5 * h[p];
                        x[q] += 0.5 * h[q];
                        let apq = coeffs.tensor(&x)[p][q];
                        if apq == 0.0 {
                            continue;
                        }
                        let corner = |dp: isize, dq: isize| {
                            let mut c = base;
                            c[p] += dp;
                            c[q] += dq;
                            flat(&c)
                        };
                        let corners = [
                            (corner(0, 0), -1.0, -1.0),
                            (corner(1, 0), 1.0, -1.0),
                            (corner(0, 1), -1.0, 1.0),
                            (corner(1, 1), 1.0, 1.0),
                        ];
                        let gp = 1.0 / (2.0 * h[p]);
                        let gq = 1.0 / (2.0 * h[q]);
                        for (ci, sp_i, sq_i) in corners {
                            let Some(ci) = ci else { continue };
                            for (cj, sp_j, sq_j) in corners {
                                let Some(cj) = cj else { continue };
                                let v =
                                    apq * volume * (sp_i * gp * sq_j * gq + sq_i * gq * sp_j * gp);
                                add(ci, cj, v);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_coefficients(
    grid: &Grid,
    coeffs: &dyn DiffusionTensor,
    d: usize,
) -> Result<f64, GridError> {
    let mut ellipticity = f64::INFINITY;
    for (node, x) in grid.coords().iter().enumerate() {
        let a = coeffs.tensor(x);
        for i in 0..d {
            for j in i + 1..d {
                let tol = 1e-12 * a[i][j].abs().max(a[j][i].abs()).max(1.0);
                if (a[i][j] - a[j][i]).abs() > tol {
                    return Err(GridError::NonSymmetricCoefficient {
                        node,
                        x: *x,
                        i,
                        j,
                        aij: a[i][j],
                        aji: a[j][i],
                    });
                }
            }
        }
        let block = DMatrix::from_fn(d, d, |i, j| a[i][j]);
        let min_eig = block
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(*v));
        if !(min_eig > 0.0) {
            return Err(GridError::NonElliptic {
                node,
                x: *x,
                min_eigenvalue: min_eig,
            });
        }
        ellipticity = ellipticity.min(min_eig);
    }
    Ok(ellipticity)
}
