use serde::{Deserialize, Serialize};

use super::scheme::{PathState, Scheme, StepOutcome, Workspace};
use crate::error::{Error, StepError};
use crate::grid::{
    assemble_operator, principal_eigenpair, weighted_lp, CoefficientField, EigenPair, Grid,
    SpatialDomain,
};
use crate::noise::RngStream;

/// Inner ball `B(R_inner)` used for the restricted functionals, with its own eigenpair.
#[derive(Debug, Clone)]
pub struct InnerBall {
    pub radius: f64,
    /// Leading outer nodes that make up the inner ball.
    pub nodes: usize,
    pub grid: Grid,
    pub eig: EigenPair,
}

impl InnerBall {
    /// Builds the inner ball on the cells of a radial outer grid; `radius` must lie on a cell face.
    pub fn new(outer: &Grid, radius: f64, tensor: &CoefficientField) -> Result<Self, Error> {
        let SpatialDomain::Ball3dRadial { radius: outer_r } = outer.domain() else {
            return Err(StepError::InvalidConfig(
                "restricted ball functionals need a ball3d_radial domain".into(),
            )
            .into());
        };
        if !(radius > 0.0) || radius > outer_r * (1.0 + 1e-12) {
            return Err(StepError::InnerBall {
                inner: radius,
                outer: *outer_r,
            }
            .into());
        }
        let h = outer.spacing()[0];
        let cells = (radius / h).round();
        if (cells * h - radius).abs() > 1e-9 * radius {
            return Err(StepError::InvalidConfig(format!(
                "inner radius {radius} is not a multiple of the cell width {h}"
            ))
            .into());
        }
        let nodes = cells as usize;
        let (grid, op) = assemble_operator(
            &SpatialDomain::Ball3dRadial { radius: cells * h },
            tensor,
            nodes,
        )?;
        let eig = principal_eigenpair(&op, &grid)?;
        Ok(Self {
            radius,
            nodes,
            grid,
            eig,
        })
    }
}

/// `û_R` and `L^p(B(R_inner))` norms of `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedFunctionals {
    pub u_hat: f64,
    pub lp: Vec<f64>,
}

pub fn restricted_ball_functionals(
    u: &[f64],
    inner: &InnerBall,
    p_list: &[f64],
) -> RestrictedFunctionals {
    let m = inner.nodes;
    let w = inner.grid.weights();
    let u_in = &u[..m];
    let u_hat = w
        .iter()
        .zip(u_in)
        .zip(&inner.eig.phi)
        .map(|((w, u), p)| w * u * p)
        .sum();
    let lp = p_list.iter().map(|p| weighted_lp(w, u_in, *p)).collect();
    RestrictedFunctionals { u_hat, lp }
}

fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

/// Names of the recorded functionals, in storage order.
pub fn functional_names(p_list: &[f64], inner: bool) -> Vec<String> {
    let mut names = vec!["u_hat".to_string()];
    names.extend(p_list.iter().map(|p| format!("l{}_norm", p_label(*p))));
    names.push("l2_norm_sq".into());
    names.push("min_u".into());
    names.push("max_u".into());
    if inner {
        names.push("u_hat_ball".into());
        names.extend(p_list.iter().map(|p| format!("l{}_norm_ball", p_label(*p))));
    }
    names
}

/// Time series of one sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub index: u64,
    /// Checkpoint times reached while alive.
    pub times: Vec<f64>,
    /// One row per entry of `times`, ordered as [`functional_names`].
    pub values: Vec<Vec<f64>>,
    pub blew_up: bool,
    pub blowup_time: Option<f64>,
    /// Checkpoint node values below `−10⁻⁶ ·` running max `|u|`.
    pub negative_nodes: usize,
    /// Running max-node `|u|` over recorded checkpoints.
    pub max_abs: f64,
}

pub(crate) fn record(
    scheme: &Scheme,
    inner: Option<&InnerBall>,
    u: &[f64],
    running_max: &mut f64,
    negative: &mut usize,
) -> Vec<f64> {
    let p = scheme.problem();
    let cfg = scheme.config();
    let w = p.grid.weights();
    let mut row = Vec::with_capacity(5 + 2 * cfg.p_list.len());
    row.push(
        w.iter()
            .zip(u)
            .zip(&p.eig.phi)
            .map(|((w, u), f)| w * u * f)
            .sum(),
    );
    row.extend(cfg.p_list.iter().map(|q| weighted_lp(w, u, *q)));
    row.push(w.iter().zip(u).map(|(w, u)| w * u * u).sum());
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    row.push(lo);
    row.push(hi);
    if let Some(ball) = inner {
        let r = restricted_ball_functionals(u, ball, &cfg.p_list);
        row.push(r.u_hat);
        row.extend(r.lp);
    }
    *running_max = running_max.max(lo.abs()).max(hi.abs());
    let floor = -1e-6 * *running_max;
    *negative += u.iter().filter(|v| **v < floor).count();
    row
}

/// Runs one path on stream `(seed, index)`; `observe` sees every checkpoint state.
pub fn simulate_path_observed(
    scheme: &Scheme,
    inner: Option<&InnerBall>,
    seed: u64,
    index: u64,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<PathResult, StepError> {
    let cfg = scheme.config();
    let checkpoints = cfg.checkpoint_steps();
    let mut state: PathState = scheme.initial_state(RngStream::new(seed, index));
    let mut ws = Workspace::new(state.u.len());
    let mut result = PathResult {
        index,
        times: Vec::with_capacity(checkpoints.len()),
        values: Vec::with_capacity(checkpoints.len()),
        blew_up: false,
        blowup_time: None,
        negative_nodes: 0,
        max_abs: 0.0,
    };
    let mut next = 0;
    loop {
        if checkpoints.get(next) == Some(&state.step) {
            observe(state.t, &state.u);
            let row = record(
                scheme,
                inner,
                &state.u,
                &mut result.max_abs,
                &mut result.negative_nodes,
            );
            result.times.push(state.t);
            result.values.push(row);
            next += 1;
        }
        if next == checkpoints.len() {
            break;
        }
        if scheme.step(&mut state, &mut ws)? == StepOutcome::BlewUp {
            result.blew_up = true;
            result.blowup_time = Some(state.t);
            break;
        }
    }
    Ok(result)
}

pub fn simulate_path(
    scheme: &Scheme,
    inner: Option<&InnerBall>,
    seed: u64,
    index: u64,
) -> Result<PathResult, StepError> {
    simulate_path_observed(scheme, inner, seed, index, |_, _| {})
}
