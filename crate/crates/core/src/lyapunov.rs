//! Generator bound for `Φ(v) = ‖v‖²` on the stochastic Allen–Cahn family and the global-existence experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{
    power, random_nonnegative_field, DiffusionSpec, DriftSpec, JumpCoeffSpec,
};
use crate::error::{CoefficientError, Error, StepError};
use crate::grid::{EllipticOperator, Grid};
use crate::integrator::{
    functional_names, simulate_path_observed, EnsembleResult, PathResult, Scheme,
};
use crate::noise::CovarianceFn;
use crate::scenario::Problem;

/// `σ = b u^m`, `φ = c z u^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllenCahnParams {
    pub b: f64,
    pub c: f64,
    pub m: f64,
    pub n: f64,
}

fn exponent_in_range(what: &'static str, v: f64) -> Result<(), CoefficientError> {
    if v > 1.0 && v < 2.0 {
        Ok(())
    } else {
        Err(CoefficientError::OutOfRange {
            what,
            value: v,
            range: "(1, 2)",
        })
    }
}

impl AllenCahnParams {
    pub fn validate(&self) -> Result<(), CoefficientError> {
        exponent_in_range("m", self.m)?;
        exponent_in_range("n", self.n)?;
        if !(self.b >= 0.0 && self.c >= 0.0) {
            return Err(CoefficientError::Invalid(format!(
                "b and c must be nonnegative, got b = {}, c = {}",
                self.b, self.c
            )));
        }
        Ok(())
    }

    /// Extracts the parameters; zero noise terms default their exponent to 3/2.
    pub fn from_problem(p: &Problem) -> Result<Self, CoefficientError> {
        let spec = &p.spec;
        if spec.drift != DriftSpec::AllenCahn {
            return Err(CoefficientError::Invalid(
                "drift must be allen_cahn (u - u^3)".into(),
            ));
        }
        let (b, m) = match spec.diffusion {
            DiffusionSpec::PowerM { b, m } => (b, m),
            DiffusionSpec::Zero => (0.0, 1.5),
            _ => {
                return Err(CoefficientError::Invalid(
                    "diffusion must be power_m (b u^m) or zero".into(),
                ))
            }
        };
        let (c, n) = match spec.jump {
            JumpCoeffSpec::ZLinearPower { c0, n } => (c0, n),
            JumpCoeffSpec::Zero => (0.0, 1.5),
        };
        if c != 0.0 && !p.jumps.m2().is_finite() {
            return Err(CoefficientError::Invalid(
                "second moment of the Levy measure is not finite".into(),
            ));
        }
        let params = Self { b, c, m, n };
        params.validate()?;
        if p.initial.iter().any(|g| !(*g > 0.0)) {
            return Err(CoefficientError::Invalid(
                "initial datum must be positive at every node".into(),
            ));
        }
        Ok(params)
    }
}

/// Terms of the upper bound for `𝓛Φ(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorBreakdown {
    /// `b² Σ wᵢ q(xᵢ,xᵢ) vᵢ^{2m}`.
    pub wiener_term: f64,
    /// `−2 vᵀ K v`.
    pub dissipation: f64,
    /// `2 Σ wᵢ (vᵢ² − vᵢ⁴)`.
    pub reaction: f64,
    /// `c² m₂ ‖v‖^{2n}_{L^{2n}}`; for `Φ = ‖·‖²` this is the exact jump second difference.
    pub jump_term: f64,
    pub total: f64,
}

/// `q(xᵢ, xᵢ)` on the grid nodes.
pub fn kernel_diagonal(kernel: &dyn CovarianceFn, grid: &Grid) -> Vec<f64> {
    grid.coords().iter().map(|x| kernel.q(x, x)).collect()
}

pub fn generator_phi(
    v: &[f64],
    params: &AllenCahnParams,
    q_diag: &[f64],
    m2: f64,
    grid: &Grid,
    op: &EllipticOperator,
) -> Result<GeneratorBreakdown, CoefficientError> {
    params.validate()?;
    let w = grid.weights();
    let mut wiener = 0.0;
    let mut reaction = 0.0;
    let mut jump = 0.0;
    for i in 0..v.len() {
        let x = v[i].max(0.0);
        let x2 = x * x;
        wiener += w[i] * q_diag[i] * power(x, 2.0 * params.m);
        reaction += w[i] * (x2 - x2 * x2);
        jump += w[i] * power(x, 2.0 * params.n);
    }
    let wiener_term = params.b * params.b * wiener;
    let dissipation = -2.0 * op.dirichlet_energy(v);
    let reaction = 2.0 * reaction;
    let jump_term = params.c * params.c * m2 * jump;
    Ok(GeneratorBreakdown {
        wiener_term,
        dissipation,
        reaction,
        jump_term,
        total: wiener_term + dissipation + reaction + jump_term,
    })
}

/// Constants certifying `𝓛Φ ≤ C Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub epsilon: f64,
    /// `b² q₀ ε + c² m₂ ε − 2`.
    pub quartic_coefficient: f64,
    pub c: f64,
    /// `(2 − m)/m`.
    pub alpha: f64,
    /// `(2 − n)/n`.
    pub beta: f64,
    pub q0: f64,
    pub m2: f64,
}

/// Young constant `ε^{−(1−pa)/(pa)}` with `a = (2 − p)/p`.
pub fn young_constant(epsilon: f64, p: f64) -> f64 {
    let a = (2.0 - p) / p;
    epsilon.powf(-(1.0 - p * a) / (p * a))
}

/// Certificate for a given `ε`; the quartic coefficient is not forced nonpositive here.
pub fn certificate_for_epsilon(
    params: &AllenCahnParams,
    q0: f64,
    m2: f64,
    epsilon: f64,
) -> BoundCertificate {
    let bq = params.b * params.b * q0;
    let cm = params.c * params.c * m2;
    BoundCertificate {
        epsilon,
        quartic_coefficient: bq * epsilon + cm * epsilon - 2.0,
        c: bq * young_constant(epsilon, params.m) + cm * young_constant(epsilon, params.n) + 2.0,
        alpha: (2.0 - params.m) / params.m,
        beta: (2.0 - params.n) / params.n,
        q0,
        m2,
    }
}

/// Picks `ε = min(1, 1/(b²q₀ + c²m₂ + 1))`, which makes the quartic coefficient at most −1.
pub fn bound_certificate(
    params: &AllenCahnParams,
    q0: f64,
    m2: f64,
) -> Result<BoundCertificate, CoefficientError> {
    params.validate()?;
    if !(q0 >= 0.0 && m2 >= 0.0 && q0.is_finite() && m2.is_finite()) {
        return Err(CoefficientError::Invalid(format!(
            "q0 and m2 must be finite and nonnegative, got q0 = {q0}, m2 = {m2}"
        )));
    }
    let eps = (1.0 / (params.b * params.b * q0 + params.c * params.c * m2 + 1.0)).min(1.0);
    Ok(certificate_for_epsilon(params, q0, m2, eps))
}

/// Outcome of checking the certificate on random nonnegative fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalsificationReport {
    pub fields: u64,
    pub violations: u64,
    /// `max (𝓛Φ − CΦ) / (1 + Φ)`.
    pub worst_excess: f64,
    pub young_violations: u64,
}

/// Tests `𝓛Φ(v) ≤ CΦ(v) + 10⁻⁸(1 + Φ)` and the Young split on random nonnegative fields.
#[allow(clippy::too_many_arguments)]
pub fn falsify_certificate(
    cert: &BoundCertificate,
    params: &AllenCahnParams,
    q_diag: &[f64],
    grid: &Grid,
    op: &EllipticOperator,
    fields: u64,
    seed: u64,
) -> Result<FalsificationReport, CoefficientError> {
    let w = grid.weights();
    let mut report = FalsificationReport {
        fields,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        young_violations: 0,
    };
    for s in 0..fields {
        let v = random_nonnegative_field(grid.len(), seed, s);
        let g = generator_phi(&v, params, q_diag, cert.m2, grid, op)?;
        let phi: f64 = w.iter().zip(&v).map(|(w, x)| w * x * x).sum();
        let excess = (g.total - cert.c * phi) / (1.0 + phi);
        report.worst_excess = report.worst_excess.max(excess);
        if excess > 1e-8 {
            report.violations += 1;
        }
        for p in [params.m, params.n] {
            let lhs: f64 = w.iter().zip(&v).map(|(w, x)| w * power(*x, 2.0 * p)).sum();
            let l4: f64 = w.iter().zip(&v).map(|(w, x)| w * x.powi(4)).sum();
            let rhs = cert.epsilon * l4 + young_constant(cert.epsilon, p) * phi;
            if lhs > rhs * (1.0 + 1e-12) {
                report.young_violations += 1;
            }
        }
    }
    Ok(report)
}

/// Empirical exceedance against the Chebyshev bound `Φ(g) e^{CT} / r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevCheck {
    pub r: f64,
    pub frequency: f64,
    /// Lower end of the 95% Wilson interval for the exceedance probability.
    pub wilson_lower: f64,
    pub bound: f64,
    pub respected: bool,
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let p = k as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    pub params: AllenCahnParams,
    pub certificate: BoundCertificate,
    pub n_paths: usize,
    pub t_end: f64,
    /// Largest max-node `|u|` over paths and checkpoints.
    pub sup_max_abs: f64,
    /// Largest checkpoint mean of `‖u‖²_{L²}`.
    pub sup_mean_l2_sq: f64,
    pub blowup_fraction: f64,
    /// Checkpoint states where `𝓛Φ > CΦ + 10⁻⁸(1 + Φ)`.
    pub generator_violations: usize,
    pub generator_states: usize,
    pub worst_generator_excess: f64,
    /// Sample mean of `e^{−Ct}‖u_t‖²` per checkpoint.
    pub discounted_mean: Vec<f64>,
    pub discounted_se: Vec<f64>,
    /// Every consecutive increase stays within 3 combined SE.
    pub supermartingale_ok: bool,
    pub chebyshev: Vec<ChebyshevCheck>,
}

impl GlobalReport {
    pub fn passed(&self) -> bool {
        self.blowup_fraction == 0.0
            && self.generator_violations == 0
            && self.supermartingale_ok
            && self.chebyshev.iter().all(|c| c.respected)
    }
}

struct StateStats {
    violations: usize,
    states: usize,
    worst: f64,
}

/// Runs the ensemble on the Allen–Cahn family and checks the global-existence consequences.
pub fn global_experiment(
    scheme: &Scheme,
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<(GlobalReport, EnsembleResult), Error> {
    let p = scheme.problem();
    let params = AllenCahnParams::from_problem(p)?;
    let q_diag = kernel_diagonal(&p.spec.noise.kernel, &p.grid);
    let q0 = q_diag.iter().fold(0.0f64, |m, v| m.max(*v));
    let m2 = if params.c == 0.0 { 0.0 } else { p.jumps.m2() };
    let cert = bound_certificate(&params, q0, m2)?;
    if n_paths < 2 {
        return Err(
            StepError::InvalidConfig(format!("at least 2 paths required, got {n_paths}")).into(),
        );
    }

    let pool = crate::integrator::pool(threads)?;
    let runs: Result<Vec<(PathResult, StateStats)>, Error> = pool.install(|| {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut stats = StateStats {
                    violations: 0,
                    states: 0,
                    worst: f64::NEG_INFINITY,
                };
                let mut err = None;
                let path =
                    simulate_path_observed(scheme, None, seed, i, |_, u| {
                        match generator_phi(u, &params, &q_diag, m2, &p.grid, &p.operator) {
                            Ok(g) => {
                                let phi: f64 =
                                    p.grid.weights().iter().zip(u).map(|(w, x)| w * x * x).sum();
                                let excess = (g.total - cert.c * phi) / (1.0 + phi);
                                stats.states += 1;
                                stats.worst = stats.worst.max(excess);
                                if excess > 1e-8 {
                                    stats.violations += 1;
                                }
                            }
                            Err(e) => err = Some(e),
                        }
                    })?;
                if let Some(e) = err {
                    return Err(e.into());
                }
                Ok((path, stats))
            })
            .collect()
    });
    let runs = runs?;
    let paths: Vec<PathResult> = runs.iter().map(|(p, _)| p.clone()).collect();

    let cfg = scheme.config();
    let times: Vec<f64> = cfg
        .checkpoint_steps()
        .iter()
        .map(|s| cfg.time_of(*s))
        .collect();
    let names = functional_names(&cfg.p_list, false);
    let ensemble = EnsembleResult::from_paths(seed, names, times.clone(), &paths);
    let l2sq = ensemble
        .index_of("l2_norm_sq")
        .expect("l2_norm_sq is always recorded");
    let l2 = ensemble.index_of("l2_norm");

    let discounted: Vec<PathResult> = paths
        .iter()
        .map(|path| {
            let mut d = path.clone();
            for (row, t) in d.values.iter_mut().zip(&path.times) {
                *row = vec![(-cert.c * t).exp() * row[l2sq]];
            }
            d
        })
        .collect();
    let disc =
        EnsembleResult::from_paths(seed, vec!["discounted".into()], times.clone(), &discounted);
    let discounted_mean: Vec<f64> = disc.mean.iter().map(|r| r[0]).collect();
    let discounted_se: Vec<f64> = disc.se.iter().map(|r| r[0]).collect();
    let supermartingale_ok = (1..discounted_mean.len()).all(|c| {
        let (s0, s1) = (discounted_se[c - 1], discounted_se[c]);
        let tol = 3.0 * (s0 * s0 + s1 * s1).sqrt();
        discounted_mean[c] <= discounted_mean[c - 1] + if tol.is_nan() { 0.0 } else { tol }
    });

    let phi_g: f64 = p
        .grid
        .weights()
        .iter()
        .zip(&p.initial)
        .map(|(w, g)| w * g * g)
        .sum();
    let sup_norm: Vec<f64> = paths
        .iter()
        .map(|path| {
            if path.blew_up {
                f64::INFINITY
            } else {
                path.values
                    .iter()
                    .map(|r| l2.map_or(r[l2sq].sqrt(), |k| r[k]))
                    .fold(0.0, f64::max)
            }
        })
        .collect();
    let t_end = cfg.time_of(cfg.n_steps());
    let chebyshev = (0..9)
        .map(|k| {
            let r = phi_g.sqrt() * 2f64.powf(k as f64 / 2.0);
            let hits = sup_norm.iter().filter(|s| **s >= r).count();
            let (lo, _) = wilson_interval(hits, n_paths);
            let bound = phi_g * (cert.c * t_end).exp() / (r * r);
            ChebyshevCheck {
                r,
                frequency: hits as f64 / n_paths as f64,
                wilson_lower: lo,
                bound,
                respected: lo <= bound,
            }
        })
        .collect();

    let report = GlobalReport {
        params,
        certificate: cert,
        n_paths,
        t_end,
        sup_max_abs: paths.iter().map(|p| p.max_abs).fold(0.0, f64::max),
        sup_mean_l2_sq: ensemble
            .mean
            .iter()
            .map(|r| r[l2sq])
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max),
        blowup_fraction: *ensemble.blowup_fraction.last().unwrap_or(&0.0),
        generator_violations: runs.iter().map(|(_, s)| s.violations).sum(),
        generator_states: runs.iter().map(|(_, s)| s.states).sum(),
        worst_generator_excess: runs
            .iter()
            .map(|(_, s)| s.worst)
            .fold(f64::NEG_INFINITY, f64::max),
        discounted_mean,
        discounted_se,
        supermartingale_ok,
        chebyshev,
    };
    Ok((report, ensemble))
}
