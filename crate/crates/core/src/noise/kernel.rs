use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use crate::error::NoiseError;
use crate::grid::{Grid, SpatialDomain};

/// Covariance function `q(x, y)` of the Wiener field.
pub trait CovarianceFn: Sync {
    fn q(&self, x: &[f64; 3], y: &[f64; 3]) -> f64;

    fn name(&self) -> String {
        "custom".into()
    }

    /// Reason the kernel cannot be used on `domain`, if any.
    fn unsupported_on(&self, _domain: &SpatialDomain) -> Option<String> {
        None
    }
}

impl<F> CovarianceFn for F
where
    F: Fn(&[f64; 3], &[f64; 3]) -> f64 + Sync,
{
    fn q(&self, x: &[f64; 3], y: &[f64; 3]) -> f64 {
        self(x, y)
    }
}

/// Kernel families available from scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `b0 · exp(−ρ x·y)`.
    ExpDot {
        b0: f64,
        rho: f64,
    },
    /// `b0 · exp(−ρ (|x|² + |y|²) / 2)`; rank one, same diagonal as `exp_dot`.
    SepGauss {
        b0: f64,
        rho: f64,
    },
    /// `b0 · exp(−|x − y|² / (2ℓ²))`.
    Gaussian {
        b0: f64,
        length: f64,
    },
    Constant {
        value: f64,
    },
    /// `min(x, y)` on an interval.
    BrownianMin,
    Zero,
}

fn dot(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    x[0] * y[0] + x[1] * y[1] + x[2] * y[2]
}

impl CovarianceFn for KernelSpec {
    fn q(&self, x: &[f64; 3], y: &[f64; 3]) -> f64 {
        match self {
            KernelSpec::ExpDot { b0, rho } => b0 * (-rho * dot(x, y)).exp(),
            KernelSpec::SepGauss { b0, rho } => b0 * (-0.5 * rho * (dot(x, x) + dot(y, y))).exp(),
            KernelSpec::Gaussian { b0, length } => {
                let d2 = (0..3).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>();
                b0 * (-d2 / (2.0 * length * length)).exp()
            }
            KernelSpec::Constant { value } => *value,
            KernelSpec::BrownianMin => x[0].min(y[0]),
            KernelSpec::Zero => 0.0,
        }
    }

    fn name(&self) -> String {
        match self {
            KernelSpec::ExpDot { .. } => "exp_dot",
            KernelSpec::SepGauss { .. } => "sep_gauss",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Constant { .. } => "constant",
            KernelSpec::BrownianMin => "brownian_min",
            KernelSpec::Zero => "zero",
        }
        .into()
    }

    fn unsupported_on(&self, domain: &SpatialDomain) -> Option<String> {
        match (self, domain) {
            (KernelSpec::BrownianMin, SpatialDomain::Interval { .. }) => None,
            (KernelSpec::BrownianMin, _) => Some("min(x, y) is only defined on an interval".into()),
            _ => None,
        }
    }
}

impl KernelSpec {
    pub fn is_zero(&self) -> bool {
        matches!(self, KernelSpec::Zero)
    }

    /// Infimum of `q` over `B(R)`, when known in closed form.
    pub fn ball_lower_bound(&self, radius: f64) -> Option<f64> {
        match self {
            KernelSpec::ExpDot { b0, rho } | KernelSpec::SepGauss { b0, rho } if *rho >= 0.0 => {
                Some(b0 * (-rho * radius * radius).exp())
            }
            KernelSpec::Gaussian { b0, length } => {
                Some(b0 * (-2.0 * radius * radius / (length * length)).exp())
            }
            KernelSpec::Constant { value } => Some(*value),
            KernelSpec::Zero => Some(0.0),
            _ => None,
        }
    }
}

/// Discretized covariance `Q_h = [q(xᵢ, xⱼ)]` with a factor `F Fᵀ = Q_h`.
#[derive(Debug, Clone)]
pub struct CovarianceKernel {
    name: String,
    n: usize,
    /// Column-major `n × rank`.
    factor: Vec<f64>,
    rank: usize,
    diag: Vec<f64>,
    q0: f64,
    trace: f64,
    eigenvalues: Vec<f64>,
    min_raw_eigenvalue: f64,
}

impl CovarianceKernel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `q(xᵢ, xᵢ)`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `max |q(xᵢ, xⱼ)|` over node pairs.
    pub fn q0(&self) -> f64 {
        self.q0
    }

    /// `Σ wᵢ q(xᵢ, xᵢ)`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Eigenvalues of `Q_h` after clamping, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue of `Q_h` before clamping.
    pub fn min_raw_eigenvalue(&self) -> f64 {
        self.min_raw_eigenvalue
    }

    /// Entry `(i, k)` of the factor.
    pub fn factor_entry(&self, i: usize, k: usize) -> f64 {
        self.factor[k * self.n + i]
    }

    /// `(F Fᵀ)ᵢⱼ`.
    pub fn reconstructed(&self, i: usize, j: usize) -> f64 {
        (0..self.rank)
            .map(|k| self.factor_entry(i, k) * self.factor_entry(j, k))
            .sum()
    }

    /// Writes `√dt · F ξ` into `out`, drawing `ξ` from `rng`; `xi` is scratch of length `rank`.
    pub fn sample_into(&self, dt: f64, rng: &mut RngStream, xi: &mut Vec<f64>, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if dt == 0.0 || self.rank == 0 {
            return;
        }
        xi.resize(self.rank, 0.0);
        rng.fill_normal(xi);
        let s = dt.sqrt();
        for (k, x) in xi.iter().enumerate() {
            let col = &self.factor[k * self.n..(k + 1) * self.n];
            let c = s * x;
            out.iter_mut().zip(col).for_each(|(o, f)| *o += c * f);
        }
    }
}

/// Eigendecomposes `Q_h`, rejecting eigenvalues below `−10⁻¹⁰ λ_max`.
pub fn factor_covariance(
    kernel: &dyn CovarianceFn,
    grid: &Grid,
) -> Result<CovarianceKernel, NoiseError> {
    if let Some(reason) = kernel.unsupported_on(grid.domain()) {
        return Err(NoiseError::UnsupportedKernel {
            kernel: kernel.name(),
            reason,
        });
    }
    let n = grid.len();
    let x = grid.coords();
    let mut q = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let qij = kernel.q(&x[i], &x[j]);
            let qji = kernel.q(&x[j], &x[i]);
            if (qij - qji).abs() > 1e-12 * qij.abs().max(qji.abs()).max(1e-300) || !qij.is_finite()
            {
                return Err(NoiseError::NonSymmetricKernel { i, j, qij, qji });
            }
            q[(i, j)] = qij;
            q[(j, i)] = qij;
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| q[(i, i)]).collect();
    let q0 = q.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let trace = diag.iter().zip(grid.weights()).map(|(d, w)| d * w).sum();

    let eig = q.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(*v));
    let lmin = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if lmin < -1e-10 * lmax.max(0.0) || (lmax <= 0.0 && lmin < 0.0) {
        return Err(NoiseError::Indefinite {
            min_eigenvalue: lmin,
            max_eigenvalue: lmax,
        });
    }
    let drop = 1e-15 * lmax;
    let mut factor = Vec::new();
    let mut rank = 0;
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    for (k, &lam) in eigenvalues.iter().enumerate() {
        if lam > drop && lam > 0.0 {
            let s = lam.sqrt();
            factor.extend(eig.eigenvectors.column(k).iter().map(|v| v * s));
            rank += 1;
        }
    }
    eigenvalues.sort_by(f64::total_cmp);
    Ok(CovarianceKernel {
        name: kernel.name(),
        n,
        factor,
        rank,
        diag,
        q0,
        trace,
        eigenvalues,
        min_raw_eigenvalue: if n == 0 { 0.0 } else { lmin },
    })
}

/// `ΔW = √dt · F ξ` with `ξ` standard normal.
pub fn sample_wiener_increment(
    cov: &CovarianceKernel,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>, NoiseError> {
    if !(dt >= 0.0) {
        return Err(NoiseError::InvalidTimeStep(dt));
    }
    let mut out = vec![0.0; cov.len()];
    let mut xi = Vec::new();
    cov.sample_into(dt, rng, &mut xi, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialDomain;

    fn ball(n: usize) -> Grid {
        Grid::new(&SpatialDomain::Ball3dRadial { radius: 1.0 }, n).unwrap()
    }

    fn interval(n: usize) -> Grid {
        Grid::new(&SpatialDomain::Interval { length: 1.0 }, n).unwrap()
    }

    fn factor_error(c: &CovarianceKernel, k: &dyn CovarianceFn, g: &Grid) -> f64 {
        let x = g.coords();
        let mut err = 0.0_f64;
        for i in 0..g.len() {
            for j in 0..g.len() {
                err = err.max((c.reconstructed(i, j) - k.q(&x[i], &x[j])).abs());
            }
        }
        err / c.q0()
    }

    #[test]
    fn dot_product_exponential_is_indefinite_on_the_ball() {
        // Two radii r ≠ s give the minor e^{-r²-s²} − e^{-2rs} < 0.
        let k = KernelSpec::ExpDot { b0: 1.0, rho: 1.0 };
        match factor_covariance(&k, &ball(40)) {
            Err(NoiseError::Indefinite { min_eigenvalue, .. }) => assert!(min_eigenvalue < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn separable_gaussian_factors_with_rank_one() {
        let k = KernelSpec::SepGauss { b0: 1.0, rho: 1.0 };
        let g = ball(60);
        let c = factor_covariance(&k, &g).unwrap();
        assert_eq!(c.rank(), 1);
        assert!(factor_error(&c, &k, &g) <= 1e-8);
        for (i, d) in c.diagonal().iter().enumerate() {
            let r = g.coords()[i][0];
            assert!((d - (-r * r).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_kernel_has_single_eigenvalue_n() {
        let k = KernelSpec::Constant { value: 1.0 };
        let c = factor_covariance(&k, &interval(30)).unwrap();
        assert_eq!(c.rank(), 1);
        assert!((c.eigenvalues().last().unwrap() - 30.0).abs() < 1e-10);
    }

    #[test]
    fn brownian_kernel_is_positive_definite() {
        let g = interval(50);
        let c = factor_covariance(&KernelSpec::BrownianMin, &g).unwrap();
        assert_eq!(c.rank(), 50);
        assert!(c.min_raw_eigenvalue() > 0.0);
        assert!(factor_error(&c, &KernelSpec::BrownianMin, &g) <= 1e-8);
        assert!(matches!(
            factor_covariance(&KernelSpec::BrownianMin, &ball(10)),
            Err(NoiseError::UnsupportedKernel { .. })
        ));
    }

    #[test]
    fn gaussian_kernel_factor_reconstructs() {
        let k = KernelSpec::Gaussian {
            b0: 2.0,
            length: 0.3,
        };
        let g = Grid::new(
            &SpatialDomain::Box {
                sides: vec![1.0, 1.0],
            },
            10,
        )
        .unwrap();
        let c = factor_covariance(&k, &g).unwrap();
        assert!(factor_error(&c, &k, &g) <= 1e-8);
        assert!((c.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_kernel_is_rejected() {
        let k = |x: &[f64; 3], y: &[f64; 3]| 1.0 + x[0] - 0.5 * y[0];
        assert!(matches!(
            factor_covariance(&k, &interval(10)),
            Err(NoiseError::NonSymmetricKernel { .. })
        ));
    }

    #[test]
    fn zero_step_gives_zero_increment() {
        let c = factor_covariance(&KernelSpec::BrownianMin, &interval(10)).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert!(sample_wiener_increment(&c, 0.0, &mut rng)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        assert!(sample_wiener_increment(&c, -1.0, &mut rng).is_err());
    }

    #[test]
    fn increments_match_covariance_and_are_uncorrelated_in_time() {
        let g = interval(8);
        let k = KernelSpec::Gaussian {
            b0: 1.0,
            length: 0.4,
        };
        let c = factor_covariance(&k, &g).unwrap();
        let (dt, m) = (0.01, 100_000);
        let n = g.len();
        let mut rng = RngStream::new(42, 0);
        let mut sum = vec![0.0; n];
        let mut prod = vec![0.0; n * n];
        let mut prod_sq = vec![0.0; n * n];
        let mut lag = 0.0;
        let mut lag_sq = 0.0;
        let mut prev = sample_wiener_increment(&c, dt, &mut rng).unwrap();
        for _ in 0..m {
            let dw = sample_wiener_increment(&c, dt, &mut rng).unwrap();
            for i in 0..n {
                sum[i] += dw[i];
                for j in 0..n {
                    let p = dw[i] * dw[j];
                    prod[i * n + j] += p;
                    prod_sq[i * n + j] += p * p;
                }
            }
            let l = dw[0] * prev[0];
            lag += l;
            lag_sq += l * l;
            prev = dw;
        }
        let mf = m as f64;
        let x = g.coords();
        for i in 0..n {
            let se = (dt * c.diagonal()[i] / mf).sqrt();
            assert!((sum[i] / mf).abs() < 5.0 * se, "mean at {i}");
            for j in 0..n {
                let mean = prod[i * n + j] / mf;
                let var = prod_sq[i * n + j] / mf - mean * mean;
                let se = (var / mf).sqrt();
                assert!(
                    (mean - dt * k.q(&x[i], &x[j])).abs() < 5.0 * se,
                    "cov ({i},{j})"
                );
            }
        }
        let lm = lag / mf;
        let lse = ((lag_sq / mf - lm * lm) / mf).sqrt();
        assert!(lm.abs() < 5.0 * lse);
    }
}
