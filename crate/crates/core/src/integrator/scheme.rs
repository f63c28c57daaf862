use serde::{Deserialize, Serialize};

use crate::coefficients::{evaluate_diffusion, evaluate_drift};
use crate::error::{Error, NoiseError, StepError};
use crate::grid::{discrete_gradient_into, BandedCholesky};
use crate::noise::{compensator_field, CovarianceKernel, JumpCoefficient, RngStream};
use crate::scenario::{IntegrationSection, Problem};

/// Time-stepping parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub theta: f64,
    pub t_end: f64,
    pub blowup_threshold: f64,
    pub max_steps: usize,
    pub checkpoint_every: usize,
    pub p_list: Vec<f64>,
    /// Drops `A_h` from the scheme; used for martingale sanity runs.
    #[serde(default)]
    pub disable_operator: bool,
}

impl SchemeConfig {
    pub fn from_section(it: &IntegrationSection) -> Self {
        let mut cfg = Self {
            dt: it.dt,
            theta: it.theta,
            t_end: it.t_end,
            blowup_threshold: it.blowup_threshold,
            max_steps: 0,
            checkpoint_every: it.checkpoint_every,
            p_list: it.p_list.clone(),
            disable_operator: false,
        };
        cfg.max_steps = cfg.steps_to_end();
        cfg
    }

    /// Steps needed to reach `t_end`, tolerating rounding in `t_end / dt`.
    pub fn steps_to_end(&self) -> usize {
        let r = self.t_end / self.dt;
        let k = r.round();
        if (r - k).abs() <= 1e-9 * r.max(1.0) {
            k as usize
        } else {
            r.ceil() as usize
        }
    }

    /// Number of steps actually taken by a path that never blows up.
    pub fn n_steps(&self) -> usize {
        self.steps_to_end().min(self.max_steps)
    }

    pub fn validate(&self, initial: &[f64]) -> Result<(), StepError> {
        let bad = |s: String| Err(StepError::InvalidConfig(s));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be at least 1".into());
        }
        if self.max_steps < self.steps_to_end() {
            return bad(format!(
                "max_steps = {} does not reach t_end = {} with dt = {}",
                self.max_steps, self.t_end, self.dt
            ));
        }
        let g_max = initial.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(self.blowup_threshold > g_max) {
            return bad(format!(
                "blowup_threshold {} must exceed max |g| = {g_max}",
                self.blowup_threshold
            ));
        }
        Ok(())
    }

    /// Step indices at which functionals are recorded, always including 0 and the last step.
    pub fn checkpoint_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.checkpoint_every).collect();
        if steps.last() != Some(&n) {
            steps.push(n);
        }
        steps
    }

    pub fn time_of(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// State of one sample path.
#[derive(Debug, Clone)]
pub struct PathState {
    pub t: f64,
    pub step: usize,
    pub u: Vec<f64>,
    pub rng: RngStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Alive,
    /// Max-node `|u|` crossed the threshold or a value became non-finite.
    BlewUp,
}

/// Per-path scratch buffers.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    f: Vec<f64>,
    sigma: Vec<f64>,
    dw: Vec<f64>,
    xi: Vec<f64>,
    comp: Vec<f64>,
    ku: Vec<f64>,
    grad: Vec<[f64; 3]>,
    marks: Vec<f64>,
    rhs: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            f: vec![0.0; n],
            sigma: vec![0.0; n],
            dw: vec![0.0; n],
            xi: Vec::new(),
            comp: vec![0.0; n],
            ku: vec![0.0; n],
            grad: vec![[0.0; 3]; n],
            marks: Vec::new(),
            rhs: vec![0.0; n],
        }
    }
}

/// Semi-implicit Euler–Maruyama scheme with compensated jumps.
///
/// In weighted form the update solves
/// `(W + θ dt K) u⁺ = W (u + dt f + σ ΔW + Σ φ(z) − dt Φ̄) − (1 − θ) dt K u`,
/// where `A_h = −W⁻¹K` and every coefficient is taken at the pre-step state.
#[derive(Debug, Clone)]
pub struct Scheme<'a> {
    problem: &'a Problem,
    cfg: SchemeConfig,
    cov: CovarianceKernel,
    implicit: Option<BandedCholesky>,
}

impl<'a> Scheme<'a> {
    pub fn new(problem: &'a Problem, cfg: SchemeConfig) -> Result<Self, Error> {
        cfg.validate(&problem.initial)?;
        let cov = problem.covariance()?;
        let implicit = if cfg.disable_operator || cfg.theta == 0.0 {
            None
        } else {
            let m = problem
                .operator
                .stiffness()
                .scaled_plus_diagonal(cfg.theta * cfg.dt, problem.grid.weights());
            Some(m.cholesky().map_err(StepError::from)?)
        };
        Ok(Self {
            problem,
            cfg,
            cov,
            implicit,
        })
    }

    pub fn problem(&self) -> &'a Problem {
        self.problem
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn covariance(&self) -> &CovarianceKernel {
        &self.cov
    }

    pub fn initial_state(&self, rng: RngStream) -> PathState {
        PathState {
            t: 0.0,
            step: 0,
            u: self.problem.initial.clone(),
            rng,
        }
    }

    /// Advances `state` by one step of size `dt`.
    pub fn step(
        &self,
        state: &mut PathState,
        ws: &mut Workspace,
    ) -> Result<StepOutcome, StepError> {
        let p = self.problem;
        let spec = &p.spec;
        let grid = &p.grid;
        let coords = grid.coords();
        let w = grid.weights();
        let dt = self.cfg.dt;
        let t = state.t;
        let u = &state.u;

        evaluate_drift(&spec.drift, u, coords, t, &mut ws.f);
        if spec.diffusion.is_zero() || self.cov.rank() == 0 {
            ws.dw.iter_mut().for_each(|v| *v = 0.0);
            ws.sigma.iter_mut().for_each(|v| *v = 0.0);
        } else {
            if spec.diffusion.uses_gradient() {
                discrete_gradient_into(grid, u, &mut ws.grad);
            }
            evaluate_diffusion(&spec.diffusion, u, &ws.grad, coords, t, &mut ws.sigma);
            self.cov
                .sample_into(dt, &mut state.rng, &mut ws.xi, &mut ws.dw);
        }

        ws.marks.clear();
        let jumps_on = !spec.jump.is_zero() && !p.jumps.is_zero();
        if jumps_on {
            match compensator_field(&p.jumps, &spec.jump, coords, u, t, &mut ws.comp) {
                Ok(()) => {}
                Err(NoiseError::NonFiniteIntegrand { .. }) => return Ok(self.blow_up(state)),
                Err(e) => return Err(e.into()),
            }
            p.jumps.sample_into(dt, &mut state.rng, &mut ws.marks);
        }

        for i in 0..u.len() {
            let mut incr = dt * ws.f[i] + ws.sigma[i] * ws.dw[i];
            if jumps_on {
                incr -= dt * ws.comp[i];
                for &z in &ws.marks {
                    incr += spec.jump.phi(u[i], &coords[i], z, t);
                }
            }
            ws.rhs[i] = w[i] * (u[i] + incr);
        }

        let explicit = if self.cfg.disable_operator {
            0.0
        } else {
            1.0 - self.cfg.theta
        };
        if explicit != 0.0 {
            p.operator.stiffness().matvec(u, &mut ws.ku);
            ws.rhs
                .iter_mut()
                .zip(&ws.ku)
                .for_each(|(r, k)| *r -= explicit * dt * k);
        }

        match &self.implicit {
            Some(chol) => {
                chol.solve_in_place(&mut ws.rhs);
                state.u.copy_from_slice(&ws.rhs);
            }
            None => {
                for ((ui, r), wi) in state.u.iter_mut().zip(&ws.rhs).zip(w) {
                    *ui = r / wi;
                }
            }
        }
        state.step += 1;
        state.t = self.cfg.time_of(state.step);

        let over = state
            .u
            .iter()
            .any(|v| !v.is_finite() || v.abs() > self.cfg.blowup_threshold);
        Ok(if over {
            StepOutcome::BlewUp
        } else {
            StepOutcome::Alive
        })
    }

    fn blow_up(&self, state: &mut PathState) -> StepOutcome {
        state.step += 1;
        state.t = self.cfg.time_of(state.step);
        StepOutcome::BlewUp
    }
}
