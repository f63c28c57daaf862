use super::domain::Grid;
use crate::error::GridError;

/// Discrete integral `Σ wᵢ vᵢ`.
pub fn quadrature(grid: &Grid, v: &[f64]) -> Result<f64, GridError> {
    grid.check_len(v)?;
    Ok(grid.weights().iter().zip(v).map(|(w, x)| w * x).sum())
}

/// `(Σ wᵢ |vᵢ|^p)^{1/p}` for `p ≥ 1`.
pub fn lp_norm(grid: &Grid, v: &[f64], p: f64) -> Result<f64, GridError> {
    grid.check_len(v)?;
    if !(p >= 1.0) || p.is_nan() {
        return Err(GridError::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(v.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
    }
    Ok(weighted_lp(grid.weights(), v, p))
}

pub(crate) fn weighted_lp(w: &[f64], v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    }
    let s: f64 = w.iter().zip(v).map(|(w, x)| w * x.abs().powf(p)).sum();
    s.powf(1.0 / p)
}

/// Per-node gradient; components beyond the gradient dimension are zero.
///
/// Centred differences in the interior, second-order one-sided differences
/// at the first and last node of each line.
pub fn discrete_gradient(grid: &Grid, v: &[f64]) -> Result<Vec<[f64; 3]>, GridError> {
    grid.check_len(v)?;
    let mut out = vec![[0.0; 3]; v.len()];
    discrete_gradient_into(grid, v, &mut out);
    Ok(out)
}

pub(crate) fn discrete_gradient_into(grid: &Grid, v: &[f64], out: &mut [[f64; 3]]) {
    let shape = grid.shape();
    for (axis, (&n, &h)) in shape.iter().zip(grid.spacing()).enumerate() {
        let stride = grid.stride(axis);
        for (node, g) in out.iter_mut().enumerate() {
            let k = grid.multi_index(node)[axis];
            g[axis] = if k == 0 {
                (-3.0 * v[node] + 4.0 * v[node + stride] - v[node + 2 * stride]) / (2.0 * h)
            } else if k == n - 1 {
                (3.0 * v[node] - 4.0 * v[node - stride] + v[node - 2 * stride]) / (2.0 * h)
            } else {
                (v[node + stride] - v[node - stride]) / (2.0 * h)
            };
        }
    }
}
