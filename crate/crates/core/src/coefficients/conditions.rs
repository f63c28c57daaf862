//! Dense-sampling checkers for the structural conditions on the coefficients.
//!
//! Every inequality is recorded as `lhs ≤ rhs` (or `lhs < rhs` when strict);
//! violated verdicts carry the worst sampled witness, which [`ConditionResult::reverify`]
//! re-evaluates from scratch.

use serde::{Deserialize, Serialize};

use super::families::{
    power, DeclaredConstants, DiffusionSpec, DriftSpec, JumpCoeffSpec, PowerLaw,
};
use crate::blowup::{improper_integral, thm42_denominator};
use crate::error::BlowupError;
use crate::grid::{DiffusionTensor, EigenPair, Grid};
use crate::noise::{CovarianceFn, JumpCoefficient, JumpMeasure, RngStream};

/// Relative slack granted to non-strict inequalities.
pub const CHECK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Untestable,
}

/// Individual inequalities making up the conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    A1Beta,
    A1Sign,
    A1Bound,
    A2Coefficients,
    A2Bound,
    A3PsiIntegral,
    A3Bound,
    A4Nonnegative,
    Ap1KappaPositive,
    Ap1KernelPositive,
    Ap1Quadratic,
    Ap2Nonnegative,
    Ap3SigmaBound,
    Ap3GBound,
    Ap3SigmaPositive,
    Ap3GPositive,
    Ap3SigmaConvex,
    Ap3GConvex,
    Ap4PhiBound,
    Ap4KBound,
    Ap4PhiPositive,
    Ap4KPositive,
    Ap4PhiConvex,
    Ap4KConvex,
    Ap5Positive,
    Ap5Tail,
    Ap6Initial,
}

impl Inequality {
    pub fn describe(&self) -> &'static str {
        match self {
            Inequality::A1Beta => "1 < beta",
            Inequality::A1Sign => "sign condition on a1",
            Inequality::A1Bound => "a1 u^beta + a2 u <= f(u, x, t)",
            Inequality::A2Coefficients => "0 <= b1, b2",
            Inequality::A2Bound => "q(x,x) sigma^2 / 2 - xi.a(x).xi <= b1 |u|^m + b2 u^2",
            Inequality::A3PsiIntegral => "int psi dnu < inf",
            Inequality::A3Bound => "phi(u,x,z)^2 <= psi(z) |u|^mu",
            Inequality::A4Nonnegative => "0 <= g(x)",
            Inequality::Ap1KappaPositive => "0 < kappa",
            Inequality::Ap1KernelPositive => "0 < q(x, y)",
            Inequality::Ap1Quadratic => "kappa (int v)^2 <= int int q v v",
            Inequality::Ap2Nonnegative => "0 <= f(u, x, t) for u >= 0",
            Inequality::Ap3SigmaBound => "sigma0(u) <= sigma(u, x, t)",
            Inequality::Ap3GBound => "G(u^2) <= sigma0(u)^2",
            Inequality::Ap3SigmaPositive => "0 < sigma0(u)",
            Inequality::Ap3GPositive => "0 < G(u)",
            Inequality::Ap3SigmaConvex => "sigma0 convex (nondecreasing slopes)",
            Inequality::Ap3GConvex => "G convex (nondecreasing slopes)",
            Inequality::Ap4PhiBound => {
                "int (int phi0 phi dx)^2 dnu <= int (int phi(u,x,z) phi dx)^2 dnu"
            }
            Inequality::Ap4KBound => "K(u^2) <= int phi0(u,z)^2 dnu",
            Inequality::Ap4PhiPositive => "0 < phi0(u, z)",
            Inequality::Ap4KPositive => "0 < K(u)",
            Inequality::Ap4PhiConvex => "phi0(., z) convex (nondecreasing slopes)",
            Inequality::Ap4KConvex => "K convex (nondecreasing slopes)",
            Inequality::Ap5Positive => "2 lambda1 u < kappa G(u) + K(u) for u > M",
            Inequality::Ap5Tail => "1.05 < tail exponent of kappa G + K - 2 lambda1 u",
            Inequality::Ap6Initial => "M < (g, phi)",
        }
    }

    fn strict(&self) -> bool {
        matches!(
            self,
            Inequality::A1Beta
                | Inequality::A1Sign
                | Inequality::A3PsiIntegral
                | Inequality::Ap1KappaPositive
                | Inequality::Ap1KernelPositive
                | Inequality::Ap3SigmaPositive
                | Inequality::Ap3GPositive
                | Inequality::Ap4PhiPositive
                | Inequality::Ap4KPositive
                | Inequality::Ap5Positive
                | Inequality::Ap5Tail
                | Inequality::Ap6Initial
        )
    }
}

/// Where a witness was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessPoint {
    State {
        u: f64,
        xi: [f64; 3],
        node: usize,
        x: [f64; 3],
        t: f64,
        z: Option<f64>,
    },
    NodePair {
        i: usize,
        j: usize,
    },
    Field {
        seed: u64,
        sample: u64,
    },
    Triple {
        u: [f64; 3],
        z: Option<f64>,
    },
    Value {
        u: f64,
        z: Option<f64>,
    },
    Parameter {
        name: String,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub inequality: Inequality,
    pub lhs: f64,
    pub rhs: f64,
    pub at: WitnessPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub notes: Vec<String>,
    pub sampled: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub results: Vec<ConditionResult>,
}

impl ConditionReport {
    pub fn get(&self, condition: &str) -> Option<&ConditionResult> {
        self.results.iter().find(|r| r.condition == condition)
    }

    pub fn all_satisfied(&self) -> bool {
        self.results.iter().all(|r| r.verdict == Verdict::Satisfied)
    }
}

/// Sample points used by the checkers.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub u: Vec<f64>,
    pub xi: Vec<f64>,
    pub z_points: usize,
    pub random_fields: u64,
    pub seed: u64,
    pub t: f64,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

impl Default for SamplePlan {
    fn default() -> Self {
        let mut u = vec![0.0];
        u.extend(log_space(1e-3, 1e3, 200));
        let mut xi = vec![0.0];
        xi.extend(log_space(1e-3, 1e3, 49));
        Self {
            u,
            xi,
            z_points: 64,
            random_fields: 100,
            seed: 0x5eed,
            t: 0.0,
        }
    }
}

impl SamplePlan {
    fn z_grid(&self, jm: &JumpMeasure) -> Vec<f64> {
        let (a, b) = jm.window();
        let n = self.z_points.max(1);
        (0..n)
            .map(|k| a + (k as f64 + 0.5) * (b - a) / n as f64)
            .collect()
    }

    fn describe(&self, nodes: usize) -> String {
        format!(
            "u: {} points in [{:e}, {:e}]; |xi|: {} magnitudes; nodes: {}; z: {} points",
            self.u.len(),
            self.u.first().copied().unwrap_or(0.0),
            self.u.last().copied().unwrap_or(0.0),
            self.xi.len(),
            nodes,
            self.z_points
        )
    }
}

/// Scenario data the checkers read.
#[derive(Clone, Copy)]
pub struct CheckContext<'a> {
    pub grid: &'a Grid,
    pub tensor: &'a dyn DiffusionTensor,
    pub kernel: &'a dyn CovarianceFn,
    pub jumps: &'a JumpMeasure,
    pub drift: &'a DriftSpec,
    pub diffusion: &'a DiffusionSpec,
    pub jump: &'a JumpCoeffSpec,
    /// Initial datum on the grid.
    pub initial: &'a [f64],
    pub declared: &'a DeclaredConstants,
}

fn violates(ineq: Inequality, lhs: f64, rhs: f64) -> bool {
    if lhs.is_nan() || rhs.is_nan() {
        return true;
    }
    if ineq.strict() {
        !(lhs < rhs)
    } else {
        lhs > rhs + CHECK_TOL * lhs.abs().max(rhs.abs()).max(1.0)
    }
}

#[derive(Default)]
struct Tracker {
    worst: Option<(f64, Witness)>,
}

impl Tracker {
    fn observe(
        &mut self,
        inequality: Inequality,
        lhs: f64,
        rhs: f64,
        at: impl FnOnce() -> WitnessPoint,
    ) {
        if !violates(inequality, lhs, rhs) {
            return;
        }
        let margin = if lhs.is_nan() || rhs.is_nan() {
            f64::INFINITY
        } else {
            (lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0)
        };
        if self.worst.as_ref().is_none_or(|(m, _)| margin > *m) {
            self.worst = Some((
                margin,
                Witness {
                    inequality,
                    lhs,
                    rhs,
                    at: at(),
                },
            ));
        }
    }

    fn finish(self, condition: &str, notes: Vec<String>, sampled: String) -> ConditionResult {
        let (verdict, witness) = match self.worst {
            Some((_, w)) => (Verdict::Violated, Some(w)),
            None => (Verdict::Satisfied, None),
        };
        ConditionResult {
            condition: condition.into(),
            verdict,
            witness,
            notes,
            sampled,
        }
    }
}

fn untestable(condition: &str, why: String) -> ConditionResult {
    ConditionResult {
        condition: condition.into(),
        verdict: Verdict::Untestable,
        witness: None,
        notes: vec![why],
        sampled: String::new(),
    }
}

fn missing(names: &[(&str, bool)]) -> Option<String> {
    let absent: Vec<&str> = names
        .iter()
        .filter(|(_, present)| !present)
        .map(|(n, _)| *n)
        .collect();
    (!absent.is_empty()).then(|| format!("missing declared constants: {}", absent.join(", ")))
}

fn a1_constants(ctx: &CheckContext) -> Option<(f64, f64, f64)> {
    let d = ctx.declared;
    match (d.a1, d.a2, d.beta) {
        (Some(a1), Some(a2), Some(beta)) => Some((a1, a2, beta)),
        _ => ctx.drift.power_form(),
    }
}

fn xi_vector(dim: usize, dir: usize, mag: f64) -> [f64; 3] {
    let mut v = [0.0; 3];
    if dir < dim {
        v[dir] = mag;
    } else {
        let s = mag / (dim as f64).sqrt();
        for (k, c) in v.iter_mut().enumerate().take(dim) {
            *c = if dir == dim || k % 2 == 0 { s } else { -s };
        }
    }
    v
}

fn directions(dim: usize) -> usize {
    match dim {
        1 => 1,
        _ => dim + 2,
    }
}

fn quad_form(a: &[[f64; 3]; 3], xi: &[f64; 3], dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += a[i][j] * xi[i] * xi[j];
        }
    }
    s
}

fn a2_pair(
    ctx: &CheckContext,
    b1: f64,
    b2: f64,
    m: f64,
    u: f64,
    xi: &[f64; 3],
    node: usize,
    t: f64,
) -> (f64, f64) {
    let x = &ctx.grid.coords()[node];
    let dim = ctx.grid.domain().gradient_dim();
    let sigma = ctx.diffusion.eval(u, xi, x, t);
    let lhs = 0.5 * ctx.kernel.q(x, x) * sigma * sigma - quad_form(&ctx.tensor.tensor(x), xi, dim);
    (lhs, b1 * power(u.abs(), m) + b2 * u * u)
}

fn slopes(f: impl Fn(f64) -> f64, u: &[f64; 3]) -> (f64, f64) {
    let (f0, f1, f2) = (f(u[0]), f(u[1]), f(u[2]));
    ((f1 - f0) / (u[1] - u[0]), (f2 - f1) / (u[2] - u[1]))
}

/// Random nonnegative test field: `|N(0,1)|` per node times an amplitude from `10^{-3}..10^{3}`.
pub fn random_nonnegative_field(n: usize, seed: u64, sample: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, sample);
    let amp = 10f64.powf(-3.0 + 6.0 * (sample % 13) as f64 / 12.0);
    (0..n).map(|_| rng.normal().abs() * amp).collect()
}

fn quadratic_pair(ctx: &CheckContext, kappa: f64, v: &[f64]) -> (f64, f64) {
    let w = ctx.grid.weights();
    let x = ctx.grid.coords();
    let mass: f64 = w.iter().zip(v).map(|(w, v)| w * v).sum();
    let mut double = 0.0;
    for i in 0..v.len() {
        let wi = w[i] * v[i];
        for j in 0..v.len() {
            double += wi * w[j] * v[j] * ctx.kernel.q(&x[i], &x[j]);
        }
    }
    (kappa * mass * mass, double)
}

fn phi_integral_pair(
    ctx: &CheckContext,
    eig: &EigenPair,
    phi0: &super::Phi0,
    u: f64,
    t: f64,
) -> (f64, f64) {
    let w = ctx.grid.weights();
    let x = ctx.grid.coords();
    let mass: f64 = w.iter().zip(&eig.phi).map(|(w, p)| w * p).sum();
    let lhs = ctx.jumps.integrate(|z| (phi0.eval(u, z) * mass).powi(2));
    let rhs = ctx.jumps.integrate(|z| {
        let s: f64 = (0..x.len())
            .map(|i| w[i] * ctx.jump.phi(u, &x[i], z, t) * eig.phi[i])
            .sum();
        s * s
    });
    (lhs, rhs)
}

fn tail_exponent(den: &dyn Fn(f64) -> f64, lower: f64) -> f64 {
    (den(lower * 1e9) / den(lower * 1e8)).log10()
}

/// Checks the conditions used for positivity and the first blow-up theorem.
pub fn check_a1_a4(ctx: &CheckContext, plan: &SamplePlan) -> ConditionReport {
    let grid = ctx.grid;
    let n = grid.len();
    let x = grid.coords();
    let t = plan.t;
    let sampled = plan.describe(n);
    let mut results = Vec::new();
    let beta_decl = a1_constants(ctx).map(|c| c.2);

    // (A1)
    match a1_constants(ctx) {
        None => results.push(untestable(
            "A1",
            "missing declared constants: a1, a2, beta".into(),
        )),
        Some((a1, a2, beta)) => {
            let mut tr = Tracker::default();
            let mut notes = Vec::new();
            tr.observe(Inequality::A1Beta, 1.0, beta, || WitnessPoint::Parameter {
                name: "beta".into(),
                value: beta,
            });
            if beta.fract() == 0.0 {
                notes.push(
                    "integer beta: alternating-sign case, sign of a1 follows (-1)^beta".into(),
                );
                let (lhs, rhs) = if beta as i64 % 2 == 0 {
                    (0.0, a1)
                } else {
                    (a1, 0.0)
                };
                tr.observe(Inequality::A1Sign, lhs, rhs, || WitnessPoint::Parameter {
                    name: "a1".into(),
                    value: a1,
                });
            } else {
                notes.push("non-integer beta: positive-solution reading, a1 > 0 required".into());
                tr.observe(Inequality::A1Sign, 0.0, a1, || WitnessPoint::Parameter {
                    name: "a1".into(),
                    value: a1,
                });
            }
            for &u in &plan.u {
                for (node, xn) in x.iter().enumerate() {
                    let lhs = a1 * power(u, beta) + a2 * u;
                    let rhs = ctx.drift.eval(u, xn, t);
                    tr.observe(Inequality::A1Bound, lhs, rhs, || WitnessPoint::State {
                        u,
                        xi: [0.0; 3],
                        node,
                        x: *xn,
                        t,
                        z: None,
                    });
                }
            }
            results.push(tr.finish("A1", notes, sampled.clone()));
        }
    }

    // (A2)
    let d = ctx.declared;
    if ctx.diffusion.is_zero() {
        results.push(Tracker::default().finish(
            "A2",
            vec!["sigma = 0: holds with b1 = b2 = 0".into()],
            sampled.clone(),
        ));
    } else if let Some(why) = missing(&[
        ("b1", d.b1.is_some()),
        ("b2", d.b2.is_some()),
        ("m", d.m.is_some()),
    ]) {
        results.push(untestable("A2", why));
    } else {
        let (b1, b2, m) = (d.b1.unwrap_or(0.0), d.b2.unwrap_or(0.0), d.m.unwrap_or(0.0));
        let mut tr = Tracker::default();
        let mut notes = Vec::new();
        if let Some(beta) = beta_decl {
            if !(m > 2.0 && m < beta + 1.0) {
                notes.push(format!(
                    "m = {m} lies outside (2, beta + 1) = (2, {})",
                    beta + 1.0
                ));
            }
        }
        tr.observe(Inequality::A2Coefficients, -b1.min(b2), 0.0, || {
            WitnessPoint::Parameter {
                name: if b1 < b2 { "b1".into() } else { "b2".into() },
                value: b1.min(b2),
            }
        });
        let dim = grid.domain().gradient_dim();
        for node in 0..n {
            for &u in &plan.u {
                for &mag in &plan.xi {
                    for dir in 0..directions(dim) {
                        let xi = xi_vector(dim, dir, mag);
                        let (lhs, rhs) = a2_pair(ctx, b1, b2, m, u, &xi, node, t);
                        tr.observe(Inequality::A2Bound, lhs, rhs, || WitnessPoint::State {
                            u,
                            xi,
                            node,
                            x: x[node],
                            t,
                            z: None,
                        });
                    }
                }
            }
        }
        results.push(tr.finish("A2", notes, sampled.clone()));
    }

    // (A3)
    if ctx.jump.is_zero() || ctx.jumps.is_zero() {
        results.push(Tracker::default().finish(
            "A3",
            vec!["no jumps: holds with psi = 0".into()],
            sampled.clone(),
        ));
    } else if let Some(why) = missing(&[("mu", d.mu.is_some()), ("psi", d.psi.is_some())]) {
        results.push(untestable("A3", why));
    } else {
        let (mu, psi) = (
            d.mu.unwrap_or(0.0),
            d.psi.unwrap_or(PowerLaw {
                coef: 0.0,
                exp: 0.0,
            }),
        );
        let mut tr = Tracker::default();
        let mut notes = Vec::new();
        if let Some(beta) = beta_decl {
            if !(mu >= 2.0 && mu < beta + 1.0) {
                notes.push(format!(
                    "mu = {mu} lies outside [2, beta + 1) = [2, {})",
                    beta + 1.0
                ));
            }
        }
        let integral = ctx.jumps.integrate(|z| psi.eval(z));
        tr.observe(Inequality::A3PsiIntegral, integral, f64::INFINITY, || {
            WitnessPoint::Parameter {
                name: "int psi dnu".into(),
                value: integral,
            }
        });
        let zs = plan.z_grid(ctx.jumps);
        for &u in &plan.u {
            for &z in &zs {
                let rhs = psi.eval(z) * power(u.abs(), mu);
                for (node, xn) in x.iter().enumerate() {
                    let lhs = ctx.jump.phi(u, xn, z, t).powi(2);
                    tr.observe(Inequality::A3Bound, lhs, rhs, || WitnessPoint::State {
                        u,
                        xi: [0.0; 3],
                        node,
                        x: *xn,
                        t,
                        z: Some(z),
                    });
                }
            }
        }
        results.push(tr.finish("A3", notes, sampled.clone()));
    }

    // (A4)
    let mut tr = Tracker::default();
    let mut notes = Vec::new();
    for (node, g) in ctx.initial.iter().enumerate() {
        tr.observe(Inequality::A4Nonnegative, 0.0, *g, || WitnessPoint::State {
            u: *g,
            xi: [0.0; 3],
            node,
            x: x[node],
            t: 0.0,
            z: None,
        });
    }
    if ctx.initial.contains(&0.0) {
        notes.push("g vanishes at some node".into());
    }
    results.push(tr.finish("A4", notes, format!("nodes: {n}")));

    ConditionReport { results }
}

fn convexity(
    tr: &mut Tracker,
    ineq: Inequality,
    f: impl Fn(f64) -> f64,
    us: &[f64],
    z: Option<f64>,
) {
    for w in us.windows(3) {
        let u = [w[0], w[1], w[2]];
        let (s1, s2) = slopes(&f, &u);
        tr.observe(ineq, s1, s2, || WitnessPoint::Triple { u, z });
    }
}

/// Checks the conditions of the noise-induced blow-up theorem.
pub fn check_aprime(ctx: &CheckContext, eig: &EigenPair, plan: &SamplePlan) -> ConditionReport {
    let grid = ctx.grid;
    let n = grid.len();
    let x = grid.coords();
    let t = plan.t;
    let d = ctx.declared;
    let sampled = plan.describe(n);
    let mut results = Vec::new();
    let mut u_sorted: Vec<f64> = plan.u.iter().copied().filter(|u| *u >= 0.0).collect();
    u_sorted.sort_by(f64::total_cmp);
    u_sorted.dedup();
    let u_pos: Vec<f64> = u_sorted.iter().copied().filter(|u| *u > 0.0).collect();

    // (A1')
    match d.kappa {
        None => results.push(untestable(
            "A1'",
            "missing declared constants: kappa".into(),
        )),
        Some(kappa) => {
            let mut tr = Tracker::default();
            tr.observe(Inequality::Ap1KappaPositive, 0.0, kappa, || {
                WitnessPoint::Parameter {
                    name: "kappa".into(),
                    value: kappa,
                }
            });
            for i in 0..n {
                for j in 0..n {
                    let q = ctx.kernel.q(&x[i], &x[j]);
                    tr.observe(Inequality::Ap1KernelPositive, 0.0, q, || {
                        WitnessPoint::NodePair { i, j }
                    });
                }
            }
            for sample in 0..plan.random_fields {
                let v = random_nonnegative_field(n, plan.seed, sample);
                let (lhs, rhs) = quadratic_pair(ctx, kappa, &v);
                tr.observe(Inequality::Ap1Quadratic, lhs, rhs, || WitnessPoint::Field {
                    seed: plan.seed,
                    sample,
                });
            }
            results.push(tr.finish(
                "A1'",
                vec![],
                format!(
                    "{} random nonnegative fields on {n} nodes",
                    plan.random_fields
                ),
            ));
        }
    }

    // (A2')
    let mut tr = Tracker::default();
    for &u in &u_sorted {
        for (node, xn) in x.iter().enumerate() {
            tr.observe(
                Inequality::Ap2Nonnegative,
                0.0,
                ctx.drift.eval(u, xn, t),
                || WitnessPoint::State {
                    u,
                    xi: [0.0; 3],
                    node,
                    x: *xn,
                    t,
                    z: None,
                },
            );
        }
    }
    results.push(tr.finish("A2'", vec![], sampled.clone()));

    // (A3')
    if ctx.diffusion.uses_gradient() {
        results.push(untestable(
            "A3'",
            "sigma depends on the gradient of u".into(),
        ));
    } else if let Some(why) = missing(&[("sigma0", d.sigma0.is_some()), ("G", d.g.is_some())]) {
        results.push(untestable("A3'", why));
    } else {
        let (s0, g) = (
            d.sigma0.unwrap_or(PowerLaw {
                coef: 0.0,
                exp: 0.0,
            }),
            d.g.unwrap_or(PowerLaw {
                coef: 0.0,
                exp: 0.0,
            }),
        );
        let mut tr = Tracker::default();
        for &u in &u_sorted {
            for (node, xn) in x.iter().enumerate() {
                let sigma = ctx.diffusion.eval(u, &[0.0; 3], xn, t);
                tr.observe(Inequality::Ap3SigmaBound, s0.eval(u), sigma, || {
                    WitnessPoint::State {
                        u,
                        xi: [0.0; 3],
                        node,
                        x: *xn,
                        t,
                        z: None,
                    }
                });
            }
            tr.observe(
                Inequality::Ap3GBound,
                g.eval(u * u),
                s0.eval(u).powi(2),
                || WitnessPoint::Value { u, z: None },
            );
        }
        for &u in &u_pos {
            tr.observe(Inequality::Ap3SigmaPositive, 0.0, s0.eval(u), || {
                WitnessPoint::Value { u, z: None }
            });
            tr.observe(Inequality::Ap3GPositive, 0.0, g.eval(u), || {
                WitnessPoint::Value { u, z: None }
            });
        }
        convexity(
            &mut tr,
            Inequality::Ap3SigmaConvex,
            |u| s0.eval(u),
            &u_sorted,
            None,
        );
        convexity(
            &mut tr,
            Inequality::Ap3GConvex,
            |u| g.eval(u),
            &u_sorted,
            None,
        );
        results.push(tr.finish("A3'", vec![], sampled.clone()));
    }

    // (A4')
    if let Some(why) = missing(&[("phi0", d.phi0.is_some()), ("K", d.k.is_some())]) {
        results.push(untestable("A4'", why));
    } else {
        let (phi0, k) = (
            d.phi0.unwrap_or(super::Phi0 {
                coef: 0.0,
                z_exp: 0.0,
                u_exp: 0.0,
            }),
            d.k.unwrap_or(PowerLaw {
                coef: 0.0,
                exp: 0.0,
            }),
        );
        let mut tr = Tracker::default();
        let mut notes = Vec::new();
        if phi0.z_exp == 1.0 && k.exp == phi0.u_exp {
            let implied = phi0.coef * phi0.coef * ctx.jumps.m2();
            if (k.coef - implied).abs() > 1e-6 * implied.abs() {
                notes.push(format!(
                    "declared K coefficient {} differs from phi0 coef^2 * m2 = {implied}",
                    k.coef
                ));
            }
        }
        let zs = plan.z_grid(ctx.jumps);
        for &u in &u_sorted {
            let (lhs, rhs) = phi_integral_pair(ctx, eig, &phi0, u, t);
            tr.observe(Inequality::Ap4PhiBound, lhs, rhs, || WitnessPoint::Value {
                u,
                z: None,
            });
            let second = ctx.jumps.integrate(|z| phi0.eval(u, z).powi(2));
            tr.observe(Inequality::Ap4KBound, k.eval(u * u), second, || {
                WitnessPoint::Value { u, z: None }
            });
        }
        for &u in &u_pos {
            for &z in &zs {
                tr.observe(Inequality::Ap4PhiPositive, 0.0, phi0.eval(u, z), || {
                    WitnessPoint::Value { u, z: Some(z) }
                });
            }
            tr.observe(Inequality::Ap4KPositive, 0.0, k.eval(u), || {
                WitnessPoint::Value { u, z: None }
            });
        }
        for &z in &zs {
            convexity(
                &mut tr,
                Inequality::Ap4PhiConvex,
                |u| phi0.eval(u, z),
                &u_sorted,
                Some(z),
            );
        }
        convexity(
            &mut tr,
            Inequality::Ap4KConvex,
            |u| k.eval(u),
            &u_sorted,
            None,
        );
        results.push(tr.finish("A4'", notes, sampled.clone()));
    }

    // (A5')
    if let Some(why) = missing(&[
        ("kappa", d.kappa.is_some()),
        ("G", d.g.is_some()),
        ("K", d.k.is_some()),
        ("M", d.big_m.is_some()),
    ]) {
        results.push(untestable("A5'", why));
    } else {
        let (kappa, g, k, big_m) = (
            d.kappa.unwrap_or(0.0),
            d.g.unwrap_or(PowerLaw {
                coef: 0.0,
                exp: 0.0,
            }),
            d.k.unwrap_or(PowerLaw {
                coef: 0.0,
                exp: 0.0,
            }),
            d.big_m.unwrap_or(0.0),
        );
        let den = thm42_denominator(eig.lambda1, kappa, &g, &k);
        let mut tr = Tracker::default();
        let mut notes = Vec::new();
        let mut us: Vec<f64> = plan.u.iter().copied().filter(|u| *u > big_m).collect();
        if big_m > 0.0 {
            us.extend(log_space(big_m * (1.0 + 1e-9), big_m * 1e6, 200));
        }
        for &u in &us {
            let lhs = 2.0 * eig.lambda1 * u;
            let rhs = kappa * g.eval(u) + k.eval(u);
            tr.observe(Inequality::Ap5Positive, lhs, rhs, || WitnessPoint::Value {
                u,
                z: None,
            });
        }
        if tr.worst.is_none() && big_m > 0.0 {
            match improper_integral(&den, big_m) {
                Ok(q) => notes.push(format!(
                    "int_M^inf du / (kappa G + K - 2 lambda1 u) = {:e}",
                    q.value
                )),
                Err(BlowupError::NotApplicable { witness: None, .. }) => {
                    let e = tail_exponent(&den, big_m);
                    tr.observe(Inequality::Ap5Tail, 1.05, e, || WitnessPoint::Parameter {
                        name: "tail_exponent".into(),
                        value: e,
                    });
                }
                Err(BlowupError::NotApplicable {
                    witness: Some(u), ..
                }) => {
                    tr.observe(
                        Inequality::Ap5Positive,
                        2.0 * eig.lambda1 * u,
                        kappa * g.eval(u) + k.eval(u),
                        || WitnessPoint::Value { u, z: None },
                    );
                }
                Err(e) => notes.push(format!("finiteness integral failed: {e}")),
            }
        } else if big_m <= 0.0 {
            notes.push("M must be positive for the finiteness integral".into());
            tr.observe(Inequality::Ap6Initial, 0.0, big_m, || {
                WitnessPoint::Parameter {
                    name: "M".into(),
                    value: big_m,
                }
            });
        }
        results.push(tr.finish("A5'", notes, format!("{} values of u > M", us.len())));
    }

    // (A6')
    match d.big_m {
        None => results.push(untestable("A6'", "missing declared constants: M".into())),
        Some(big_m) => {
            let g_phi = initial_projection(ctx, eig);
            let mut tr = Tracker::default();
            tr.observe(Inequality::Ap6Initial, big_m, g_phi, || {
                WitnessPoint::Parameter {
                    name: "(g, phi)".into(),
                    value: g_phi,
                }
            });
            let mut notes = vec![format!("(g, phi) = {g_phi:e}")];
            if (g_phi > big_m) != (g_phi * g_phi > big_m) {
                notes.push(format!(
                    "(g, phi)^2 = {:e} is on the other side of M; the mean-square comparison starts from (g, phi)^2",
                    g_phi * g_phi
                ));
            }
            results.push(tr.finish("A6'", notes, format!("quadrature over {n} nodes")));
        }
    }

    ConditionReport { results }
}

fn initial_projection(ctx: &CheckContext, eig: &EigenPair) -> f64 {
    ctx.grid
        .weights()
        .iter()
        .zip(ctx.initial)
        .zip(&eig.phi)
        .map(|((w, g), p)| w * g * p)
        .sum()
}

impl ConditionResult {
    /// Re-evaluates the witness from scratch; `Some(true)` when it still violates.
    pub fn reverify(&self, ctx: &CheckContext, eig: Option<&EigenPair>) -> Option<bool> {
        let w = self.witness.as_ref()?;
        let d = ctx.declared;
        let pair: (f64, f64) = match (&w.inequality, &w.at) {
            (Inequality::A1Beta, WitnessPoint::Parameter { .. }) => (1.0, a1_constants(ctx)?.2),
            (Inequality::A1Sign, WitnessPoint::Parameter { .. }) => {
                let (a1, _, beta) = a1_constants(ctx)?;
                if beta.fract() == 0.0 && beta as i64 % 2 != 0 {
                    (a1, 0.0)
                } else {
                    (0.0, a1)
                }
            }
            (Inequality::A1Bound, WitnessPoint::State { u, node, t, .. }) => {
                let (a1, a2, beta) = a1_constants(ctx)?;
                (
                    a1 * power(*u, beta) + a2 * u,
                    ctx.drift.eval(*u, &ctx.grid.coords()[*node], *t),
                )
            }
            (Inequality::A2Coefficients, WitnessPoint::Parameter { .. }) => {
                (-d.b1?.min(d.b2?), 0.0)
            }
            (Inequality::A2Bound, WitnessPoint::State { u, xi, node, t, .. }) => {
                a2_pair(ctx, d.b1?, d.b2?, d.m?, *u, xi, *node, *t)
            }
            (Inequality::A3PsiIntegral, WitnessPoint::Parameter { .. }) => {
                let psi = d.psi?;
                (ctx.jumps.integrate(|z| psi.eval(z)), f64::INFINITY)
            }
            (
                Inequality::A3Bound,
                WitnessPoint::State {
                    u,
                    node,
                    t,
                    z: Some(z),
                    ..
                },
            ) => (
                ctx.jump.phi(*u, &ctx.grid.coords()[*node], *z, *t).powi(2),
                d.psi?.eval(*z) * power(u.abs(), d.mu?),
            ),
            (Inequality::A4Nonnegative, WitnessPoint::State { node, .. }) => {
                (0.0, *ctx.initial.get(*node)?)
            }
            (Inequality::Ap1KappaPositive, _) => (0.0, d.kappa?),
            (Inequality::Ap1KernelPositive, WitnessPoint::NodePair { i, j }) => {
                let x = ctx.grid.coords();
                (0.0, ctx.kernel.q(&x[*i], &x[*j]))
            }
            (Inequality::Ap1Quadratic, WitnessPoint::Field { seed, sample }) => {
                let v = random_nonnegative_field(ctx.grid.len(), *seed, *sample);
                quadratic_pair(ctx, d.kappa?, &v)
            }
            (Inequality::Ap2Nonnegative, WitnessPoint::State { u, node, t, .. }) => {
                (0.0, ctx.drift.eval(*u, &ctx.grid.coords()[*node], *t))
            }
            (Inequality::Ap3SigmaBound, WitnessPoint::State { u, node, t, .. }) => (
                d.sigma0?.eval(*u),
                ctx.diffusion
                    .eval(*u, &[0.0; 3], &ctx.grid.coords()[*node], *t),
            ),
            (Inequality::Ap3GBound, WitnessPoint::Value { u, .. }) => {
                (d.g?.eval(u * u), d.sigma0?.eval(*u).powi(2))
            }
            (Inequality::Ap3SigmaPositive, WitnessPoint::Value { u, .. }) => {
                (0.0, d.sigma0?.eval(*u))
            }
            (Inequality::Ap3GPositive, WitnessPoint::Value { u, .. }) => (0.0, d.g?.eval(*u)),
            (Inequality::Ap3SigmaConvex, WitnessPoint::Triple { u, .. }) => {
                let s0 = d.sigma0?;
                slopes(|v| s0.eval(v), u)
            }
            (Inequality::Ap3GConvex, WitnessPoint::Triple { u, .. }) => {
                let g = d.g?;
                slopes(|v| g.eval(v), u)
            }
            (Inequality::Ap4PhiBound, WitnessPoint::Value { u, .. }) => {
                phi_integral_pair(ctx, eig?, &d.phi0?, *u, 0.0)
            }
            (Inequality::Ap4KBound, WitnessPoint::Value { u, .. }) => {
                let phi0 = d.phi0?;
                (
                    d.k?.eval(u * u),
                    ctx.jumps.integrate(|z| phi0.eval(*u, z).powi(2)),
                )
            }
            (Inequality::Ap4PhiPositive, WitnessPoint::Value { u, z: Some(z) }) => {
                (0.0, d.phi0?.eval(*u, *z))
            }
            (Inequality::Ap4KPositive, WitnessPoint::Value { u, .. }) => (0.0, d.k?.eval(*u)),
            (Inequality::Ap4PhiConvex, WitnessPoint::Triple { u, z: Some(z) }) => {
                let phi0 = d.phi0?;
                slopes(|v| phi0.eval(v, *z), u)
            }
            (Inequality::Ap4KConvex, WitnessPoint::Triple { u, .. }) => {
                let k = d.k?;
                slopes(|v| k.eval(v), u)
            }
            (Inequality::Ap5Positive, WitnessPoint::Value { u, .. }) => (
                2.0 * eig?.lambda1 * u,
                d.kappa? * d.g?.eval(*u) + d.k?.eval(*u),
            ),
            (Inequality::Ap5Tail, WitnessPoint::Parameter { .. }) => {
                let (g, k) = (d.g?, d.k?);
                let den = thm42_denominator(eig?.lambda1, d.kappa?, &g, &k);
                (1.05, tail_exponent(&den, d.big_m?))
            }
            (Inequality::Ap6Initial, WitnessPoint::Parameter { name, .. }) if name == "M" => {
                (0.0, d.big_m?)
            }
            (Inequality::Ap6Initial, WitnessPoint::Parameter { .. }) => {
                (d.big_m?, initial_projection(ctx, eig?))
            }
            _ => return None,
        };
        Some(violates(w.inequality, pair.0, pair.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{InitialDatum, Phi0};
    use crate::grid::{assemble_operator, principal_eigenpair, CoefficientField, SpatialDomain};
    use crate::noise::{KernelSpec, LevySpec};

    struct Setup {
        grid: Grid,
        eig: EigenPair,
        jumps: JumpMeasure,
        g: Vec<f64>,
    }

    fn ball(n: usize, initial: &InitialDatum) -> Setup {
        let (grid, op) = assemble_operator(
            &SpatialDomain::Ball3dRadial { radius: 1.0 },
            &CoefficientField::default(),
            n,
        )
        .unwrap();
        let eig = principal_eigenpair(&op, &grid).unwrap();
        let jumps = JumpMeasure::new(
            LevySpec::Exponential {
                mass: 1.0,
                rate: 1.0,
            },
            None,
            None,
        )
        .unwrap();
        let g = initial.evaluate(&grid, Some(&eig.phi)).unwrap();
        Setup {
            grid,
            eig,
            jumps,
            g,
        }
    }

    fn small_plan() -> SamplePlan {
        let grid_of = |n| {
            std::iter::once(0.0)
                .chain(log_space(1e-3, 1e3, n))
                .collect()
        };
        SamplePlan {
            u: grid_of(60),
            xi: grid_of(25),
            z_points: 16,
            ..SamplePlan::default()
        }
    }

    fn example_41_declared(gamma0: f64) -> DeclaredConstants {
        DeclaredConstants {
            a1: Some(1.0),
            a2: Some(-1.0),
            beta: Some(8.0 / 3.0),
            b1: Some(0.5 * gamma0 * gamma0),
            b2: Some(0.0),
            m: Some(3.0),
            mu: Some(6.0),
            psi: Some(PowerLaw {
                coef: 0.01 * 0.01,
                exp: 2.0,
            }),
            ..Default::default()
        }
    }

    fn run_41(gamma0: f64) -> (ConditionReport, bool) {
        let s = ball(
            24,
            &InitialDatum::ExpDecay {
                a0: 1.0,
                alpha: 1.0,
            },
        );
        let kernel = KernelSpec::SepGauss { b0: 1.0, rho: 1.0 };
        let drift = DriftSpec::PowerDrift {
            a1: 1.0,
            a2: -1.0,
            beta: 8.0 / 3.0,
        };
        let diffusion = DiffusionSpec::GradMixed { gamma0 };
        let jump = JumpCoeffSpec::ZLinearPower { c0: 0.01, n: 3.0 };
        let declared = example_41_declared(gamma0);
        let ctx = CheckContext {
            grid: &s.grid,
            tensor: &CoefficientField::default(),
            kernel: &kernel,
            jumps: &s.jumps,
            drift: &drift,
            diffusion: &diffusion,
            jump: &jump,
            initial: &s.g,
            declared: &declared,
        };
        let report = check_a1_a4(&ctx, &small_plan());
        let reverified = report
            .results
            .iter()
            .filter(|r| r.verdict == Verdict::Violated)
            .all(|r| r.reverify(&ctx, None) == Some(true));
        (report, reverified)
    }

    #[test]
    fn small_noise_intensity_satisfies_all_conditions() {
        let (report, _) = run_41(0.1);
        for r in &report.results {
            assert_eq!(r.verdict, Verdict::Satisfied, "{r:?}");
        }
        let a3 = report.get("A3").unwrap();
        assert!(a3.notes.iter().any(|n| n.contains("mu = 6")));
    }

    #[test]
    fn large_noise_intensity_violates_a2_with_reverifiable_witness() {
        let (report, reverified) = run_41(2.0);
        let a2 = report.get("A2").unwrap();
        assert_eq!(a2.verdict, Verdict::Violated);
        match &a2.witness.as_ref().unwrap().at {
            WitnessPoint::State { xi, .. } => assert!(xi[0].abs() > 1.0),
            other => panic!("{other:?}"),
        }
        assert!(reverified);
        assert_eq!(report.get("A1").unwrap().verdict, Verdict::Satisfied);
    }

    #[test]
    fn missing_constants_make_conditions_untestable() {
        let s = ball(12, &InitialDatum::Constant { value: 1.0 });
        let declared = DeclaredConstants::default();
        let kernel = KernelSpec::Constant { value: 1.0 };
        let ctx = CheckContext {
            grid: &s.grid,
            tensor: &CoefficientField::default(),
            kernel: &kernel,
            jumps: &s.jumps,
            drift: &DriftSpec::Zero,
            diffusion: &DiffusionSpec::PowerM { b: 1.0, m: 1.5 },
            jump: &JumpCoeffSpec::ZLinearPower { c0: 1.0, n: 1.5 },
            initial: &s.g,
            declared: &declared,
        };
        let r = check_a1_a4(&ctx, &small_plan());
        for c in ["A1", "A2", "A3"] {
            assert_eq!(r.get(c).unwrap().verdict, Verdict::Untestable, "{c}");
        }
        assert!(r.get("A2").unwrap().notes[0].contains("b1"));
        let r = check_aprime(&ctx, &s.eig, &small_plan());
        assert!(r
            .results
            .iter()
            .filter(|c| c.condition != "A2'")
            .all(|c| c.verdict == Verdict::Untestable));
    }

    #[test]
    fn zero_noise_gives_trivial_a2() {
        let s = ball(12, &InitialDatum::Constant { value: 1.0 });
        let declared = DeclaredConstants::default();
        let kernel = KernelSpec::Zero;
        let ctx = CheckContext {
            grid: &s.grid,
            tensor: &CoefficientField::default(),
            kernel: &kernel,
            jumps: &s.jumps,
            drift: &DriftSpec::AllenCahn,
            diffusion: &DiffusionSpec::Zero,
            jump: &JumpCoeffSpec::Zero,
            initial: &s.g,
            declared: &declared,
        };
        let r = check_a1_a4(&ctx, &small_plan());
        assert_eq!(r.get("A2").unwrap().verdict, Verdict::Satisfied);
        assert_eq!(r.get("A1").unwrap().verdict, Verdict::Satisfied);
        assert!(r.get("A1").unwrap().notes[0].contains("integer beta"));
    }

    const K42: PowerLaw = PowerLaw {
        coef: 4.0,
        exp: 6.0,
    };

    fn example_42(
        g_decl: PowerLaw,
        k_decl: PowerLaw,
        kappa: f64,
        big_m: f64,
    ) -> (ConditionReport, bool) {
        let s = ball(
            24,
            &InitialDatum::ExpDecay {
                a0: 5.0,
                alpha: 1.0,
            },
        );
        let kernel = KernelSpec::ExpDot { b0: 1.0, rho: 1.0 };
        let declared = DeclaredConstants {
            kappa: Some(kappa),
            g: Some(g_decl),
            k: Some(k_decl),
            sigma0: Some(PowerLaw {
                coef: 1.0,
                exp: 4.0,
            }),
            phi0: Some(Phi0 {
                coef: 2.0,
                z_exp: 1.0,
                u_exp: 6.0,
            }),
            big_m: Some(big_m),
            ..Default::default()
        };
        let ctx = CheckContext {
            grid: &s.grid,
            tensor: &CoefficientField::default(),
            kernel: &kernel,
            jumps: &s.jumps,
            drift: &DriftSpec::PurePower { alpha: 1.0 },
            diffusion: &DiffusionSpec::Power { mu: 1.0, k: 4.0 },
            jump: &JumpCoeffSpec::ZLinearPower { c0: 2.0, n: 6.0 },
            initial: &s.g,
            declared: &declared,
        };
        let r = check_aprime(&ctx, &s.eig, &small_plan());
        let ok = r
            .results
            .iter()
            .filter(|c| c.verdict == Verdict::Violated)
            .all(|c| c.reverify(&ctx, Some(&s.eig)) == Some(true));
        (r, ok)
    }

    #[test]
    fn noise_induced_conditions_hold_for_declared_constants() {
        let (r, _) = example_42(
            PowerLaw {
                coef: 1.0,
                exp: 4.0,
            },
            K42,
            (-1.0_f64).exp(),
            1.5,
        );
        for c in &r.results {
            assert_eq!(c.verdict, Verdict::Satisfied, "{c:?}");
        }
        assert!(r
            .get("A4'")
            .unwrap()
            .notes
            .iter()
            .any(|n| n.contains("differs")));
    }

    #[test]
    fn linear_g_violates_a5_with_witness() {
        let linear = PowerLaw {
            coef: 1.0,
            exp: 1.0,
        };
        let (r, ok) = example_42(linear, linear, 1.0, 1.5);
        let a5 = r.get("A5'").unwrap();
        assert_eq!(a5.verdict, Verdict::Violated, "{a5:?}");
        assert!(matches!(
            a5.witness.as_ref().unwrap().at,
            WitnessPoint::Value { .. }
        ));
        assert!(ok);
    }

    #[test]
    fn linear_growth_fails_the_finiteness_integral() {
        let (r, ok) = example_42(
            PowerLaw {
                coef: 30.0,
                exp: 1.0,
            },
            PowerLaw {
                coef: 1.0,
                exp: 1.0,
            },
            1.0,
            1.5,
        );
        let a5 = r.get("A5'").unwrap();
        assert_eq!(a5.verdict, Verdict::Violated, "{a5:?}");
        assert_eq!(a5.witness.as_ref().unwrap().inequality, Inequality::Ap5Tail);
        assert!(ok);
    }

    #[test]
    fn overlarge_kappa_violates_quadratic_bound() {
        let (r, ok) = example_42(
            PowerLaw {
                coef: 1.0,
                exp: 4.0,
            },
            K42,
            2.0,
            1.5,
        );
        let a1 = r.get("A1'").unwrap();
        assert_eq!(a1.verdict, Verdict::Violated);
        assert!(matches!(
            a1.witness.as_ref().unwrap().at,
            WitnessPoint::Field { .. }
        ));
        assert!(ok);
    }
}
