use serde::{Deserialize, Serialize};

use super::domain::Grid;
use super::operator::EllipticOperator;
use crate::error::GridError;

const MAX_ITERATIONS: usize = 10_000;
const TOLERANCE: f64 = 1e-10;
/// Accepted at the iteration cap when the stricter tolerance was not reached.
const FALLBACK_TOLERANCE: f64 = 1e-8;

/// Principal eigenvalue of `−A_h` and its nonnegative eigenvector with `Σ wφ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Inverse power iteration on `K φ = λ W φ`, seeded with the constant vector.
pub fn principal_eigenpair(op: &EllipticOperator, grid: &Grid) -> Result<EigenPair, GridError> {
    grid.check_len(op.weights())?;
    let n = op.len();
    let w = op.weights();
    let mut x = vec![1.0; n];
    let mut kx = vec![0.0; n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut y: Vec<f64> = x.iter().zip(w).map(|(xi, wi)| xi * wi).collect();
        op.factor().solve_in_place(&mut y);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi = yi / norm);

        op.stiffness().matvec(&x, &mut kx);
        let num: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(w).map(|(a, b)| a * a * b).sum();
        lambda = num / den;
        residual = x
            .iter()
            .zip(&kx)
            .zip(w)
            .map(|((xi, ki), wi)| (ki / wi - lambda * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= TOLERANCE * lambda.max(1.0) {
            break;
        }
    }
    if !(residual <= TOLERANCE * lambda.max(1.0))
        && !(residual <= FALLBACK_TOLERANCE * lambda.max(1.0))
    {
        return Err(GridError::NoConvergence {
            iterations,
            residual,
        });
    }

    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let max = x.iter().fold(0.0_f64, |m, v| m.max(*v));
    if let Some((node, &value)) = x.iter().enumerate().find(|(_, v)| **v < -1e-10 * max) {
        return Err(GridError::NotOneSigned { node, value, max });
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    let mass: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
    x.iter_mut().for_each(|v| *v /= mass);

    Ok(EigenPair {
        lambda1: lambda,
        phi: x,
        residual,
        iterations,
    })
}
