//! Blow-up thresholds, improper-integral time bounds and comparison ODEs.

use serde::{Deserialize, Serialize};

use crate::coefficients::PowerLaw;
use crate::error::BlowupError;
use crate::grid::{lp_norm, Grid};

/// Value at which a comparison ODE trajectory counts as escaped.
pub const ESCAPE_VALUE: f64 = 1e12;
/// Absolute accuracy target of the improper integrals.
pub const QUAD_TOL: f64 = 1e-8;

/// Tail exponents at or below this are treated as divergent.
const DIVERGENCE_EXPONENT: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

/// `((λ₁ − a₂)/a₁)^{1/(β−1)}` when `λ₁ ≥ a₂`, otherwise 0.
pub fn threshold_41(lambda1: f64, a1: f64, a2: f64, beta: f64) -> Result<f64, BlowupError> {
    check_41(a1, beta)?;
    if lambda1 <= a2 {
        return Ok(0.0);
    }
    Ok(((lambda1 - a2) / a1).powf(1.0 / (beta - 1.0)))
}

fn check_41(a1: f64, beta: f64) -> Result<(), BlowupError> {
    if !(a1 > 0.0) {
        return Err(BlowupError::InvalidParameter(format!(
            "a1 must be positive, got {a1}"
        )));
    }
    if !(beta > 1.0) {
        return Err(BlowupError::InvalidParameter(format!(
            "beta must exceed 1, got {beta}"
        )));
    }
    Ok(())
}

/// `∫_{lower}^∞ ds / den(s)` by the substitution `s = lower / w`, `w = v^p`,
/// and adaptive Simpson on `v ∈ (0, 1]`.
///
/// Fails with a witness when `den ≤ 0` on the sampled log grid, and reports
/// divergence when `den` grows no faster than `s^{1.05}`.
pub fn improper_integral(den: &dyn Fn(f64) -> f64, lower: f64) -> Result<QuadResult, BlowupError> {
    if !(lower > 0.0 && lower.is_finite()) {
        return Err(BlowupError::InvalidParameter(format!(
            "lower limit must be positive, got {lower}"
        )));
    }
    for k in 0..=240 {
        let s = lower * 10f64.powf(k as f64 / 20.0);
        let d = den(s);
        if !(d > 0.0) || d.is_nan() {
            return Err(BlowupError::NotApplicable {
                reason: format!("denominator {d:e} is not positive at u = {s:e}"),
                witness: Some(s),
            });
        }
    }
    let (s1, s2) = (lower * 1e8, lower * 1e9);
    let e = (den(s2) / den(s1)).log10();
    if !(e > DIVERGENCE_EXPONENT) {
        return Err(BlowupError::NotApplicable {
            reason: format!("integral diverges: denominator grows like u^{e:.3}"),
            witness: None,
        });
    }
    let p = (2.0 / (e - 1.0)).clamp(0.05, 50.0);
    let integrand = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let w = v.powf(p);
        let s = lower / w;
        if !(s < 1e150) {
            return 0.0;
        }
        s * s / den(s) / lower * p * v.powf(p - 1.0)
    };
    let (value, error) =
        adaptive_simpson(&integrand, 0.0, 1.0, 1e-2 * QUAD_TOL).map_err(BlowupError::Quadrature)?;
    Ok(QuadResult { value, error })
}

/// Adaptive Simpson quadrature; returns the value and the accumulated error estimate.
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(f64, f64), String> {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut err = 0.0;
    let v = simpson_step(f, a, b, fa, fm, fb, whole, tol, 60, &mut err)?;
    Ok((v, err))
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err: &mut f64,
) -> Result<f64, String> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    if !(flm.is_finite() && frm.is_finite()) {
        return Err(format!("integrand not finite near {m:e}"));
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        *err += delta.abs() / 15.0;
        return Ok(left + right + delta / 15.0);
    }
    Ok(
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err)?
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err)?,
    )
}

/// Upper bound on the blow-up time of `ξ' = a₁ξ^β − (λ₁ − a₂)ξ` from `ξ₀`.
///
/// When `λ₁ < a₂` the linear term is dropped and the integrand is `1/(a₁ s^β)`.
pub fn blowup_time_integral_41(
    lambda1: f64,
    a1: f64,
    a2: f64,
    beta: f64,
    xi0: f64,
) -> Result<QuadResult, BlowupError> {
    let threshold = threshold_41(lambda1, a1, a2, beta)?;
    if !(xi0 > threshold) {
        return Err(BlowupError::NotApplicable {
            reason: format!("initial value {xi0} does not exceed threshold {threshold}"),
            witness: Some(xi0),
        });
    }
    let c = (lambda1 - a2).max(0.0);
    improper_integral(&|s: f64| a1 * s.powf(beta) - c * s, xi0)
}

/// Denominator `κG(u) + K(u) − 2λ₁u`.
pub fn thm42_denominator(
    lambda1: f64,
    kappa: f64,
    g: &PowerLaw,
    k: &PowerLaw,
) -> impl Fn(f64) -> f64 + use<> {
    let (g, k) = (*g, *k);
    move |u: f64| kappa * g.eval(u) + k.eval(u) - 2.0 * lambda1 * u
}

/// `∫_{η₀}^∞ du/(κG + K − 2λ₁u)` together with the finiteness integral from `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm42Integrals {
    pub t_upper: QuadResult,
    pub from_m: QuadResult,
}

pub fn blowup_time_integral_42(
    lambda1: f64,
    kappa: f64,
    g: &PowerLaw,
    k: &PowerLaw,
    big_m: f64,
    eta0: f64,
) -> Result<Thm42Integrals, BlowupError> {
    if !(kappa > 0.0) {
        return Err(BlowupError::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    if !(eta0 > big_m) {
        return Err(BlowupError::NotApplicable {
            reason: format!("initial value {eta0} does not exceed M = {big_m}"),
            witness: Some(eta0),
        });
    }
    let den = thm42_denominator(lambda1, kappa, g, k);
    let from_m = improper_integral(&den, big_m)?;
    let t_upper = improper_integral(&den, eta0)?;
    Ok(Thm42Integrals { t_upper, from_m })
}

/// Comparison equations solved with equality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComparisonOde {
    /// `ξ' = −λ₁ξ + a₁ξ^β + a₂ξ`.
    Thm41 {
        lambda1: f64,
        a1: f64,
        a2: f64,
        beta: f64,
    },
    /// `η' = −2λ₁η + κG(η) + K(η)`.
    Thm42 {
        lambda1: f64,
        kappa: f64,
        g: PowerLaw,
        k: PowerLaw,
    },
}

impl ComparisonOde {
    pub fn rhs(&self, y: f64) -> f64 {
        match self {
            ComparisonOde::Thm41 {
                lambda1,
                a1,
                a2,
                beta,
            } => {
                let nl = if *a1 == 0.0 {
                    0.0
                } else {
                    a1 * crate::coefficients::power(y, *beta)
                };
                -lambda1 * y + nl + a2 * y
            }
            ComparisonOde::Thm42 {
                lambda1,
                kappa,
                g,
                k,
            } => -2.0 * lambda1 * y + kappa * g.eval(y) + k.eval(y),
        }
    }

    fn rk4(&self, y: f64, h: f64) -> f64 {
        let k1 = self.rhs(y);
        let k2 = self.rhs(y + 0.5 * h * k1);
        let k3 = self.rhs(y + 0.5 * h * k2);
        let k4 = self.rhs(y + h * k3);
        y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }
}

/// Solution sampled on a time grid; values stop at the escape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub escape_time: Option<f64>,
}

impl Trajectory {
    /// Value at `t` by linear interpolation; `None` past the last sample.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|s| *s <= t);
        if i == 0 {
            return self.values.first().copied();
        }
        if i >= self.values.len() {
            return if (t - self.times[self.values.len() - 1]).abs() <= 1e-12 * t.abs().max(1.0) {
                self.values.last().copied()
            } else {
                None
            };
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let s = (t - t0) / (t1 - t0);
        Some(self.values[i - 1] * (1.0 - s) + self.values[i] * s)
    }
}

/// Classical RK4 with a growth-limited step, refined until two successive
/// refinements agree to 1e-6 relative at every grid point and in the escape time.
pub fn comparison_ode_solve(ode: &ComparisonOde, y0: f64, t_grid: &[f64]) -> Trajectory {
    let mut frac = 0.05;
    let mut prev = integrate(ode, y0, t_grid, frac);
    for _ in 0..18 {
        frac *= 0.5;
        let cur = integrate(ode, y0, t_grid, frac);
        if agree(&prev, &cur) {
            return cur;
        }
        prev = cur;
    }
    prev
}

fn agree(a: &Trajectory, b: &Trajectory) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-6 * x.abs().max(y.abs()).max(1e-300);
    let n = a.values.len().min(b.values.len());
    if a.values.len().abs_diff(b.values.len()) > 1 {
        return false;
    }
    let values_ok = a.values[..n].iter().zip(&b.values[..n]).all(|(x, y)| {
        // Samples adjacent to the escape are compared only below the escape value.
        (x.max(*y) > 1e-3 * ESCAPE_VALUE) || close(*x, *y)
    });
    let escape_ok = match (a.escape_time, b.escape_time) {
        (None, None) => true,
        (Some(x), Some(y)) => close(x, y),
        _ => false,
    };
    values_ok && escape_ok
}

fn integrate(ode: &ComparisonOde, y0: f64, t_grid: &[f64], frac: f64) -> Trajectory {
    let mut times = Vec::with_capacity(t_grid.len());
    let mut values = Vec::with_capacity(t_grid.len());
    let Some(&t_start) = t_grid.first() else {
        return Trajectory {
            times,
            values,
            escape_time: None,
        };
    };
    let span = t_grid
        .last()
        .map(|t| t - t_start)
        .unwrap_or(0.0)
        .max(1e-300);
    let hmax = frac * span;
    let (mut t, mut y) = (t_start, y0);
    for &target in t_grid {
        while t < target {
            let f = ode.rhs(y);
            let mut h = (target - t).min(hmax);
            if f != 0.0 {
                h = h.min(frac * y.abs().max(1e-300) / f.abs());
            }
            if h <= 0.0 || !h.is_finite() {
                h = (target - t).min(hmax);
            }
            let next = ode.rk4(y, h);
            if !(next.is_finite() && next < ESCAPE_VALUE) {
                let (mut lo, mut hi) = (0.0, h);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let v = ode.rk4(y, mid);
                    if v.is_finite() && v < ESCAPE_VALUE {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * (t + hi).abs() {
                        break;
                    }
                }
                times.extend_from_slice(&t_grid[..values.len()]);
                return Trajectory {
                    times,
                    values,
                    escape_time: Some(t + 0.5 * (lo + hi)),
                };
            }
            y = next;
            t = if target - t <= h { target } else { t + h };
        }
        values.push(y);
    }
    times.extend_from_slice(t_grid);
    Trajectory {
        times,
        values,
        escape_time: None,
    }
}

/// Escape time of the comparison ODE, searched up to `t_max`.
pub fn ode_escape_time(ode: &ComparisonOde, y0: f64, t_max: f64) -> Option<f64> {
    comparison_ode_solve(ode, y0, &[0.0, t_max]).escape_time
}

/// `‖φ‖_{L^q}` with `q = p/(p−1)`; the maximum of `φ` when `p = 1`.
pub fn holder_lp_link(grid: &Grid, phi: &[f64], p: f64) -> Result<f64, BlowupError> {
    if !(p >= 1.0) {
        return Err(BlowupError::InvalidParameter(format!(
            "p must be >= 1, got {p}"
        )));
    }
    if p == 1.0 {
        return Ok(phi.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    lp_norm(grid, phi, p / (p - 1.0)).map_err(|e| BlowupError::InvalidParameter(e.to_string()))
}

/// Threshold, applicability and time bounds for one comparison equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: String,
    pub threshold: f64,
    pub initial_value: f64,
    pub applicable: bool,
    pub t_upper: Option<f64>,
    pub quadrature_error: Option<f64>,
    pub ode_escape_time: Option<f64>,
    /// `∫_M^∞` finiteness integral (second theorem only).
    pub integral_from_threshold: Option<f64>,
    pub trajectory: Vec<[f64; 2]>,
    pub notes: Vec<String>,
}

fn sample_grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

fn trajectory_pairs(tr: &Trajectory) -> Vec<[f64; 2]> {
    tr.times
        .iter()
        .zip(&tr.values)
        .map(|(t, v)| [*t, *v])
        .collect()
}

/// Bound for `ξ = E(u, φ)` with `ξ₀ = (g, φ)`.
pub fn bound_report_41(
    lambda1: f64,
    a1: f64,
    a2: f64,
    beta: f64,
    xi0: f64,
) -> Result<BoundReport, BlowupError> {
    let threshold = threshold_41(lambda1, a1, a2, beta)?;
    let mut notes = Vec::new();
    if lambda1 < a2 {
        notes.push("lambda1 < a2: comparison uses xi' = a1 xi^beta".into());
    } else if lambda1 == a2 {
        notes.push("lambda1 = a2: boundary case, threshold is 0".into());
    }
    let ode = if lambda1 < a2 {
        ComparisonOde::Thm41 {
            lambda1: 0.0,
            a1,
            a2: 0.0,
            beta,
        }
    } else {
        ComparisonOde::Thm41 {
            lambda1,
            a1,
            a2,
            beta,
        }
    };
    let mut report = BoundReport {
        kind: "thm41".into(),
        threshold,
        initial_value: xi0,
        applicable: false,
        t_upper: None,
        quadrature_error: None,
        ode_escape_time: None,
        integral_from_threshold: None,
        trajectory: Vec::new(),
        notes,
    };
    match blowup_time_integral_41(lambda1, a1, a2, beta, xi0) {
        Ok(q) => {
            report.applicable = true;
            report.t_upper = Some(q.value);
            report.quadrature_error = Some(q.error);
            let tr = comparison_ode_solve(&ode, xi0, &sample_grid(1.5 * q.value, 150));
            report.ode_escape_time = tr.escape_time;
            report.trajectory = trajectory_pairs(&tr);
        }
        Err(BlowupError::NotApplicable { reason, .. }) => {
            report.notes.push(reason);
            let tr = comparison_ode_solve(&ode, xi0, &sample_grid(1.0, 100));
            report.trajectory = trajectory_pairs(&tr);
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

/// Bound for `η = E(u, φ)²` with `η₀ = (g, φ)²`.
pub fn bound_report_42(
    lambda1: f64,
    kappa: f64,
    g: &PowerLaw,
    k: &PowerLaw,
    big_m: f64,
    g_phi: f64,
) -> Result<BoundReport, BlowupError> {
    let eta0 = g_phi * g_phi;
    let ode = ComparisonOde::Thm42 {
        lambda1,
        kappa,
        g: *g,
        k: *k,
    };
    let mut report = BoundReport {
        kind: "thm42".into(),
        threshold: big_m,
        initial_value: eta0,
        applicable: false,
        t_upper: None,
        quadrature_error: None,
        ode_escape_time: None,
        integral_from_threshold: None,
        trajectory: Vec::new(),
        notes: Vec::new(),
    };
    if (g_phi > big_m) != (eta0 > big_m) {
        report.notes.push(format!(
            "(g, phi) = {g_phi} and eta0 = (g, phi)^2 = {eta0} lie on different sides of M = {big_m}"
        ));
    }
    match blowup_time_integral_42(lambda1, kappa, g, k, big_m, eta0) {
        Ok(q) => {
            report.applicable = true;
            report.t_upper = Some(q.t_upper.value);
            report.quadrature_error = Some(q.t_upper.error.max(q.from_m.error));
            report.integral_from_threshold = Some(q.from_m.value);
            let tr = comparison_ode_solve(&ode, eta0, &sample_grid(1.5 * q.t_upper.value, 150));
            report.ode_escape_time = tr.escape_time;
            report.trajectory = trajectory_pairs(&tr);
        }
        Err(BlowupError::NotApplicable { reason, .. }) => report.notes.push(reason),
        Err(e) => return Err(e),
    }
    Ok(report)
}
