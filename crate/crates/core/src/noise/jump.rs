use serde::{Deserialize, Serialize};

use super::gauss_legendre::gl256;
use super::rng::RngStream;
use crate::error::NoiseError;

/// Fraction of `∫ z² ν(dz)` the automatic window must capture.
pub const M2_CAPTURE: f64 = 1.0 - 1e-6;

/// Lévy measure families on the mark space `(0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevySpec {
    /// Density `mass · rate · e^{−rate z}`.
    Exponential {
        mass: f64,
        rate: f64,
    },
    /// Density `mass / upper` on `(0, upper)`.
    Uniform {
        mass: f64,
        upper: f64,
    },
    Zero,
}

impl LevySpec {
    fn validate(&self) -> Result<(), NoiseError> {
        let bad = |m: String| Err(NoiseError::InvalidMeasure(m));
        match self {
            LevySpec::Exponential { mass, rate } => {
                if !(mass.is_finite() && *mass >= 0.0) || !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!(
                        "exponential needs mass >= 0 and rate > 0, got {mass}, {rate}"
                    ));
                }
            }
            LevySpec::Uniform { mass, upper } => {
                if !(mass.is_finite() && *mass >= 0.0) || !(upper.is_finite() && *upper > 0.0) {
                    return bad(format!(
                        "uniform needs mass >= 0 and upper > 0, got {mass}, {upper}"
                    ));
                }
            }
            LevySpec::Zero => {}
        }
        Ok(())
    }

    /// Density of `ν` at `z`.
    pub fn density(&self, z: f64) -> f64 {
        match self {
            LevySpec::Exponential { mass, rate } if z > 0.0 => mass * rate * (-rate * z).exp(),
            LevySpec::Uniform { mass, upper } if z > 0.0 && z < *upper => mass / upper,
            _ => 0.0,
        }
    }

    /// `∫_a^b z^k ν(dz)` for `k ∈ {0, 1, 2}`.
    pub fn moment(&self, k: i32, a: f64, b: f64) -> f64 {
        match self {
            LevySpec::Exponential { mass, rate } => {
                // ∫ z^k r e^{−rz} = k!/r^k · [P_k(ra) e^{−ra} − P_k(rb) e^{−rb}], P_k the truncated exponential series.
                let tail = |x: f64| {
                    if x.is_infinite() {
                        return 0.0;
                    }
                    let mut term = 1.0;
                    let mut s = 1.0;
                    for j in 1..=k {
                        term *= x / j as f64;
                        s += term;
                    }
                    s * (-x).exp()
                };
                let fact: f64 = (1..=k).map(|j| j as f64).product();
                mass * fact / rate.powi(k) * (tail(rate * a) - tail(rate * b))
            }
            LevySpec::Uniform { mass, upper } => {
                let (a, b) = (a.max(0.0), b.min(*upper));
                if b <= a {
                    return 0.0;
                }
                mass / upper * (b.powi(k + 1) - a.powi(k + 1)) / (k + 1) as f64
            }
            LevySpec::Zero => 0.0,
        }
    }

    fn support_end(&self) -> f64 {
        match self {
            LevySpec::Uniform { upper, .. } => *upper,
            _ => f64::INFINITY,
        }
    }
}

/// Truncated, finite-activity jump measure.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMeasure {
    spec: LevySpec,
    z_min: f64,
    z_max: f64,
    lambda: f64,
    m1: f64,
    m2: f64,
}

impl JumpMeasure {
    /// Builds the window; an absent `z_max` captures at least [`M2_CAPTURE`] of `m₂`.
    pub fn new(spec: LevySpec, z_min: Option<f64>, z_max: Option<f64>) -> Result<Self, NoiseError> {
        spec.validate()?;
        let z_min = z_min.unwrap_or(0.0);
        let z_max = match z_max {
            Some(z) => z,
            None => auto_window(&spec, z_min),
        };
        if !(z_min >= 0.0 && z_max > z_min && z_max.is_finite()) {
            return Err(NoiseError::InvalidMeasure(format!(
                "window [{z_min}, {z_max}] must satisfy 0 <= z_min < z_max < inf"
            )));
        }
        Ok(Self {
            lambda: spec.moment(0, z_min, z_max),
            m1: spec.moment(1, z_min, z_max),
            m2: spec.moment(2, z_min, z_max),
            spec,
            z_min,
            z_max,
        })
    }

    pub fn spec(&self) -> &LevySpec {
        &self.spec
    }

    pub fn window(&self) -> (f64, f64) {
        (self.z_min, self.z_max)
    }

    /// Total rate `Λ = ν([z_min, z_max])`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// `∫ z² ν(dz)` over the whole mark space.
    pub fn m2_untruncated(&self) -> f64 {
        self.spec.moment(2, 0.0, self.spec.support_end())
    }

    pub fn is_zero(&self) -> bool {
        self.lambda == 0.0
    }

    /// Draws a mark from `ν / Λ` on the window.
    pub fn sample_mark(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform();
        let (a, b) = (self.z_min, self.z_max);
        match self.spec {
            LevySpec::Exponential { rate, .. } => {
                let (ea, eb) = ((-rate * a).exp(), (-rate * b).exp());
                (-(ea - u * (ea - eb)).ln() / rate).clamp(a, b)
            }
            LevySpec::Uniform { upper, .. } => {
                let b = b.min(upper);
                a + u * (b - a)
            }
            LevySpec::Zero => a,
        }
    }

    /// Appends the marks of one step to `out` (after clearing it).
    pub fn sample_into(&self, dt: f64, rng: &mut RngStream, out: &mut Vec<f64>) {
        out.clear();
        let count = rng.poisson(self.lambda * dt);
        for _ in 0..count {
            out.push(self.sample_mark(rng));
        }
    }

    /// `∫ f(z) ν(dz)` over the window by 256-point Gauss–Legendre.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (x, w) = gl256();
        let (a, b) = (self.z_min, self.z_max);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        x.iter()
            .zip(w)
            .map(|(x, w)| {
                let z = mid + half * x;
                w * f(z) * self.spec.density(z)
            })
            .sum::<f64>()
            * half
    }
}

fn auto_window(spec: &LevySpec, z_min: f64) -> f64 {
    let end = spec.support_end();
    if end.is_finite() {
        return end;
    }
    let total = spec.moment(2, z_min, f64::INFINITY);
    if total == 0.0 {
        return z_min + 1.0;
    }
    let enough = |z: f64| spec.moment(2, z_min, z) >= M2_CAPTURE * total;
    let mut hi = z_min + 1.0;
    while !enough(hi) {
        hi = z_min + 2.0 * (hi - z_min);
    }
    let mut lo = z_min;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if enough(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    hi
}

/// Marks of the jumps in one step: `K ~ Poisson(Λ dt)` draws from `ν / Λ`.
pub fn sample_jumps(
    jm: &JumpMeasure,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>, NoiseError> {
    if !(dt >= 0.0) {
        return Err(NoiseError::InvalidTimeStep(dt));
    }
    let mut out = Vec::new();
    jm.sample_into(dt, rng, &mut out);
    Ok(out)
}

/// Jump coefficient `φ(u, x, z, t)`.
pub trait JumpCoefficient: Sync {
    fn phi(&self, u: f64, x: &[f64; 3], z: f64, t: f64) -> f64;

    /// True when `φ` is linear in `z`, enabling the closed-form compensator `m₁ φ(u, x, 1, t)`.
    fn is_z_linear(&self) -> bool {
        false
    }
}

/// Node-wise `∫ φ(uᵢ, xᵢ, z, t) ν(dz)`.
pub fn compensator_field(
    jm: &JumpMeasure,
    coeff: &dyn JumpCoefficient,
    coords: &[[f64; 3]],
    u: &[f64],
    t: f64,
    out: &mut [f64],
) -> Result<(), NoiseError> {
    if jm.is_zero() {
        out.iter_mut().for_each(|o| *o = 0.0);
        return Ok(());
    }
    for (node, ((o, &ui), x)) in out.iter_mut().zip(u).zip(coords).enumerate() {
        if coeff.is_z_linear() {
            *o = jm.m1 * coeff.phi(ui, x, 1.0, t);
            if !o.is_finite() {
                return Err(NoiseError::NonFiniteIntegrand { node, z: 1.0 });
            }
        } else {
            let mut witness = None;
            *o = jm.integrate(|z| {
                let v = coeff.phi(ui, x, z, t);
                if !v.is_finite() && witness.is_none() {
                    witness = Some(z);
                }
                v
            });
            if let Some(z) = witness {
                return Err(NoiseError::NonFiniteIntegrand { node, z });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ZPower {
        c0: f64,
        n: f64,
        linear: bool,
    }

    impl JumpCoefficient for ZPower {
        fn phi(&self, u: f64, _: &[f64; 3], z: f64, _: f64) -> f64 {
            self.c0 * z * u.max(0.0).powf(self.n)
        }
        fn is_z_linear(&self) -> bool {
            self.linear
        }
    }

    fn exp_measure(z_max: Option<f64>) -> JumpMeasure {
        JumpMeasure::new(
            LevySpec::Exponential {
                mass: 1.0,
                rate: 1.0,
            },
            None,
            z_max,
        )
        .unwrap()
    }

    #[test]
    fn moments_of_truncated_exponential() {
        let jm = exp_measure(Some(12.0));
        assert!((jm.lambda() - (1.0 - (-12.0_f64).exp())).abs() < 1e-15);
        // ∫_0^Z z e^{-z} = 1 − (1 + Z) e^{-Z}.
        assert!((jm.m1() - (1.0 - 13.0 * (-12.0_f64).exp())).abs() < 1e-14);
        assert!((jm.m2_untruncated() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn automatic_window_captures_second_moment() {
        let jm = exp_measure(None);
        let (_, zmax) = jm.window();
        assert!(jm.m2() / 2.0 >= M2_CAPTURE);
        // The window is the smallest one: shrinking it loses the guarantee.
        let smaller = exp_measure(Some(zmax * 0.99));
        assert!(smaller.m2() / 2.0 < M2_CAPTURE);
        let u = JumpMeasure::new(
            LevySpec::Uniform {
                mass: 2.0,
                upper: 3.0,
            },
            None,
            None,
        )
        .unwrap();
        assert_eq!(u.window(), (0.0, 3.0));
        assert!((u.m1() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_measures_are_rejected() {
        assert!(JumpMeasure::new(
            LevySpec::Exponential {
                mass: 1.0,
                rate: 0.0
            },
            None,
            None
        )
        .is_err());
        assert!(JumpMeasure::new(
            LevySpec::Exponential {
                mass: 1.0,
                rate: 1.0
            },
            Some(2.0),
            Some(1.0)
        )
        .is_err());
    }

    #[test]
    fn zero_rate_step_has_no_jumps() {
        let jm = exp_measure(Some(12.0));
        let mut rng = RngStream::new(3, 0);
        for _ in 0..1000 {
            assert!(sample_jumps(&jm, 0.0, &mut rng).unwrap().is_empty());
        }
        let none = JumpMeasure::new(LevySpec::Zero, None, Some(1.0)).unwrap();
        assert!(sample_jumps(&none, 1.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn counts_and_marks_match_poisson_and_exponential_means() {
        let jm = exp_measure(Some(12.0));
        let mut rng = RngStream::new(11, 0);
        let steps = 100_000;
        let (mut c, mut c2, mut z, mut z2, mut nz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..steps {
            let marks = sample_jumps(&jm, 1.0, &mut rng).unwrap();
            let k = marks.len() as f64;
            c += k;
            c2 += k * k;
            for m in marks {
                z += m;
                z2 += m * m;
                nz += 1.0;
            }
        }
        let s = steps as f64;
        let cm = c / s;
        let cse = ((c2 / s - cm * cm) / s).sqrt();
        assert!((cm - jm.lambda()).abs() < 5.0 * cse);
        let zm = z / nz;
        let zse = ((z2 / nz - zm * zm) / nz).sqrt();
        assert!((zm - jm.m1() / jm.lambda()).abs() < 5.0 * zse);
    }

    #[test]
    fn compensator_closed_form_and_quadrature_agree() {
        let jm = exp_measure(None);
        let coords = vec![[0.0; 3]; 4];
        let u = [0.0, 0.5, 1.0, 2.0];
        let mut closed = [0.0; 4];
        let mut quad = [0.0; 4];
        let c = ZPower {
            c0: 0.3,
            n: 3.0,
            linear: true,
        };
        compensator_field(&jm, &c, &coords, &u, 0.0, &mut closed).unwrap();
        let q = ZPower { linear: false, ..c };
        compensator_field(&jm, &q, &coords, &u, 0.0, &mut quad).unwrap();
        for i in 0..4 {
            // Untruncated: c0 · ∫ z e^{-z} dz · u³ = c0 u³.
            assert!((closed[i] - 0.3 * u[i].powi(3)).abs() < 1e-5 * u[i].powi(3).max(1e-300));
            assert!((closed[i] - quad[i]).abs() <= 1e-12 * closed[i].abs().max(1.0));
        }
        assert_eq!(closed[0], 0.0);
    }

    #[test]
    fn z_independent_coefficient_gives_rate_times_value() {
        struct Flat;
        impl JumpCoefficient for Flat {
            fn phi(&self, u: f64, _: &[f64; 3], _: f64, _: f64) -> f64 {
                2.0 * u
            }
        }
        let jm = exp_measure(Some(5.0));
        let mut out = [0.0];
        compensator_field(&jm, &Flat, &[[0.0; 3]], &[1.5], 0.0, &mut out).unwrap();
        assert!((out[0] - jm.lambda() * 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_integrand_reports_witness() {
        struct Singular;
        impl JumpCoefficient for Singular {
            fn phi(&self, _: f64, _: &[f64; 3], z: f64, _: f64) -> f64 {
                if z > 3.0 {
                    f64::INFINITY
                } else {
                    z
                }
            }
        }
        let jm = exp_measure(Some(10.0));
        let mut out = [0.0; 2];
        match compensator_field(&jm, &Singular, &[[0.0; 3]; 2], &[1.0, 1.0], 0.0, &mut out) {
            Err(NoiseError::NonFiniteIntegrand { node: 0, z }) => assert!(z > 3.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn compensated_jump_sum_has_zero_mean() {
        let jm = exp_measure(None);
        let c = ZPower {
            c0: 0.5,
            n: 2.0,
            linear: true,
        };
        let u = 1.3;
        let dt = 0.05;
        let mut comp = [0.0];
        compensator_field(&jm, &c, &[[0.0; 3]], &[u], 0.0, &mut comp).unwrap();
        let mut rng = RngStream::new(5, 9);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        let mut marks = Vec::new();
        for _ in 0..n {
            jm.sample_into(dt, &mut rng, &mut marks);
            let inc: f64 = marks
                .iter()
                .map(|z| c.phi(u, &[0.0; 3], *z, 0.0))
                .sum::<f64>()
                - dt * comp[0];
            s += inc;
            s2 += inc * inc;
        }
        let m = s / n as f64;
        let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
        assert!(m.abs() < 5.0 * se, "{m} vs {se}");
    }
}
