//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use spdelab_core::blowup::{bound_report_41, bound_report_42, BoundReport};
use spdelab_core::coefficients::{check_a1_a4, check_aprime, ConditionReport, SamplePlan};
use spdelab_core::error::{Error as CoreError, ScenarioError};
use spdelab_core::integrator::{run_ensemble, InnerBall, Scheme, SchemeConfig};
use spdelab_core::lyapunov::{
    bound_certificate, falsify_certificate, global_experiment, kernel_diagonal, AllenCahnParams,
    BoundCertificate, FalsificationReport, GlobalReport,
};
use spdelab_core::{Problem, ScenarioSpec};

use crate::canned;
use crate::output::{ensemble_csv, fmt_f64, sha256_hex, to_json, Manifest, VERSION};

/// Configuration problem: reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// 2 for configuration errors, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let config = err.chain().any(|e| {
        e.is::<ConfigError>()
            || e.is::<ScenarioError>()
            || matches!(e.downcast_ref::<CoreError>(), Some(CoreError::Scenario(_)))
    });
    if config {
        2
    } else {
        1
    }
}

/// Shared command-line options.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub scenario: String,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

/// Loaded scenario with overrides applied.
pub struct Loaded {
    pub spec: ScenarioSpec,
    pub source: String,
    pub config_hash: String,
    pub out: PathBuf,
}

/// Reads a scenario file, falling back to a canned scenario of that name.
pub fn load(opts: &Options) -> Result<Loaded> {
    let path = Path::new(&opts.scenario);
    let text = if path.is_file() {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    } else if let Some(text) = canned::canned(&opts.scenario) {
        text.to_string()
    } else {
        return Err(ConfigError(format!(
            "scenario '{}' is neither a file nor a canned scenario ({})",
            opts.scenario,
            canned::names().collect::<Vec<_>>().join(", ")
        ))
        .into());
    };
    let mut spec = ScenarioSpec::from_toml(&text)?;
    if let Some(p) = opts.paths {
        spec.monte_carlo.paths = p;
    }
    if let Some(s) = opts.seed {
        spec.monte_carlo.seed = s;
    }
    if let Some(dt) = opts.dt {
        spec.integration.dt = dt;
    }
    if let Some(t) = opts.t_end {
        spec.integration.t_end = t;
    }
    spec.validate()?;
    let canonical = spec.to_toml()?;
    Ok(Loaded {
        config_hash: sha256_hex(canonical.as_bytes()),
        spec,
        source: opts.scenario.clone(),
        out: opts.out.clone(),
    })
}

fn manifest(loaded: &Loaded, subcommand: &str) -> Manifest {
    Manifest {
        tool: "spdelab".into(),
        version: VERSION.into(),
        subcommand: subcommand.into(),
        scenario: loaded.source.clone(),
        seed: loaded.spec.monte_carlo.seed,
        output_dir: loaded.out.display().to_string(),
        config_hash: loaded.config_hash.clone(),
    }
}

fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    manifest: &'a Manifest,
    #[serde(flatten)]
    body: T,
}

fn stamped<T: Serialize>(m: &Manifest, body: T) -> Result<String> {
    to_json(&Stamped { manifest: m, body })
}

#[derive(Serialize)]
pub struct EigReport {
    pub lambda1: f64,
    pub residual: f64,
    pub iterations: usize,
    pub phi_min: f64,
    pub phi_integral: f64,
    pub nodes: usize,
}

pub fn cmd_eig(opts: &Options) -> Result<Vec<PathBuf>> {
    let loaded = load(opts)?;
    let m = manifest(&loaded, "eig");
    let p = Problem::assemble(&loaded.spec)?;
    let w = p.grid.weights();
    let report = EigReport {
        lambda1: p.eig.lambda1,
        residual: p.eig.residual,
        iterations: p.eig.iterations,
        phi_min: p.eig.phi.iter().copied().fold(f64::INFINITY, f64::min),
        phi_integral: w.iter().zip(&p.eig.phi).map(|(w, f)| w * f).sum(),
        nodes: p.grid.len(),
    };
    let mut csv = m.csv_comment();
    csv.push_str("node,x0,x1,x2,weight,phi\n");
    for (i, (x, (w, f))) in p
        .grid
        .coords()
        .iter()
        .zip(w.iter().zip(&p.eig.phi))
        .enumerate()
    {
        csv.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            fmt_f64(x[0]),
            fmt_f64(x[1]),
            fmt_f64(x[2]),
            fmt_f64(*w),
            fmt_f64(*f)
        ));
    }
    Ok(vec![
        write(&opts.out, "eig.json", &stamped(&m, report)?)?,
        write(&opts.out, "phi.csv", &csv)?,
    ])
}

#[derive(Serialize)]
pub struct CheckOutput {
    pub positivity_conditions: ConditionReport,
    pub noise_blowup_conditions: ConditionReport,
    pub lambda1: f64,
    pub g_phi: f64,
}

pub fn check(p: &Problem) -> CheckOutput {
    let ctx = p.check_context();
    let plan = SamplePlan::default();
    CheckOutput {
        positivity_conditions: check_a1_a4(&ctx, &plan),
        noise_blowup_conditions: check_aprime(&ctx, &p.eig, &plan),
        lambda1: p.eig.lambda1,
        g_phi: p.initial_projection(),
    }
}

pub fn cmd_check(opts: &Options) -> Result<Vec<PathBuf>> {
    let loaded = load(opts)?;
    let m = manifest(&loaded, "check");
    let p = Problem::assemble(&loaded.spec)?;
    Ok(vec![write(
        &opts.out,
        "check.json",
        &stamped(&m, check(&p))?,
    )?])
}

#[derive(Serialize, Default)]
pub struct BoundOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_blowup: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_square_blowup: Option<BoundReport>,
    pub notes: Vec<String>,
}

pub fn bounds(p: &Problem) -> Result<BoundOutput> {
    let d = &p.spec.declared_constants;
    let mut out = BoundOutput::default();
    let lambda1 = p.eig.lambda1;
    let g_phi = p.initial_projection();
    let a1 = match (d.a1, d.a2, d.beta) {
        (Some(a1), Some(a2), Some(beta)) => Some((a1, a2, beta)),
        _ => p.spec.drift.power_form(),
    };
    match a1 {
        Some((a1, a2, beta)) if a1 > 0.0 && beta > 1.0 => {
            out.mean_blowup = Some(bound_report_41(lambda1, a1, a2, beta, g_phi)?);
        }
        Some(_) => out
            .notes
            .push("drift lower bound has a1 <= 0 or beta <= 1: no mean blow-up bound".into()),
        None => out
            .notes
            .push("no drift lower bound a1 u^beta + a2 u available".into()),
    }
    match (d.kappa, d.g, d.k, d.big_m) {
        (Some(kappa), Some(g), Some(k), Some(big_m)) => {
            out.mean_square_blowup = Some(bound_report_42(lambda1, kappa, &g, &k, big_m, g_phi)?);
        }
        _ => out
            .notes
            .push("kappa, G, K and M not all declared: no mean-square blow-up bound".into()),
    }
    Ok(out)
}

pub fn cmd_bound(opts: &Options) -> Result<Vec<PathBuf>> {
    let loaded = load(opts)?;
    let m = manifest(&loaded, "bound");
    let p = Problem::assemble(&loaded.spec)?;
    Ok(vec![write(
        &opts.out,
        "bound.json",
        &stamped(&m, bounds(&p)?)?,
    )?])
}

#[derive(Serialize)]
pub struct SimulateSummary {
    pub n_paths: usize,
    pub t_end: f64,
    pub dt: f64,
    pub final_blowup_fraction: f64,
    pub final_n_alive: usize,
    pub blowup_times: Vec<Option<f64>>,
    pub negative_nodes: usize,
    pub max_abs: f64,
    pub g_phi: f64,
}

pub fn cmd_simulate(opts: &Options) -> Result<Vec<PathBuf>> {
    let loaded = load(opts)?;
    let m = manifest(&loaded, "simulate");
    let p = Problem::assemble(&loaded.spec)?;
    let cfg = SchemeConfig::from_section(&p.spec.integration);
    let scheme = Scheme::new(&p, cfg)?;
    let inner = match p.spec.integration.restricted_ball_radius {
        Some(r) => Some(InnerBall::new(&p.grid, r, &p.spec.operator)?),
        None => None,
    };
    let mc = &p.spec.monte_carlo;
    let (ens, paths) = run_ensemble(&scheme, inner.as_ref(), mc.paths, mc.seed, opts.threads)?;
    let summary = SimulateSummary {
        n_paths: ens.n_paths,
        t_end: p.spec.integration.t_end,
        dt: p.spec.integration.dt,
        final_blowup_fraction: *ens.blowup_fraction.last().unwrap_or(&0.0),
        final_n_alive: *ens.n_alive.last().unwrap_or(&0),
        blowup_times: paths.iter().map(|q| q.blowup_time).collect(),
        negative_nodes: paths.iter().map(|q| q.negative_nodes).sum(),
        max_abs: paths.iter().map(|q| q.max_abs).fold(0.0, f64::max),
        g_phi: p.initial_projection(),
    };
    Ok(vec![
        write(&opts.out, "ensemble.csv", &ensemble_csv(&m, &ens))?,
        write(&opts.out, "summary.json", &stamped(&m, summary)?)?,
    ])
}

#[derive(Serialize)]
pub struct LyapunovOutput {
    pub certificate: BoundCertificate,
    pub falsification: FalsificationReport,
    pub experiment: GlobalReport,
}

pub fn cmd_lyapunov(opts: &Options) -> Result<Vec<PathBuf>> {
    let loaded = load(opts)?;
    let m = manifest(&loaded, "lyapunov");
    let p = Problem::assemble(&loaded.spec)?;
    let params = AllenCahnParams::from_problem(&p).map_err(CoreError::from)?;
    let q_diag = kernel_diagonal(&p.spec.noise.kernel, &p.grid);
    let q0 = q_diag.iter().fold(0.0f64, |a, b| a.max(*b));
    let m2 = if params.c == 0.0 { 0.0 } else { p.jumps.m2() };
    let certificate = bound_certificate(&params, q0, m2).map_err(CoreError::from)?;
    let falsification = falsify_certificate(
        &certificate,
        &params,
        &q_diag,
        &p.grid,
        &p.operator,
        1000,
        m.seed,
    )
    .map_err(CoreError::from)?;
    let scheme = Scheme::new(&p, SchemeConfig::from_section(&p.spec.integration))?;
    let mc = &p.spec.monte_carlo;
    let (experiment, ens) = global_experiment(&scheme, mc.paths, mc.seed, opts.threads)?;
    let out = LyapunovOutput {
        certificate,
        falsification,
        experiment,
    };
    Ok(vec![
        write(&opts.out, "lyapunov.json", &stamped(&m, out)?)?,
        write(&opts.out, "lyapunov_ensemble.csv", &ensemble_csv(&m, &ens))?,
    ])
}
