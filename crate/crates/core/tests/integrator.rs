use spdelab_core::grid::lp_norm;
use spdelab_core::integrator::{
    restricted_ball_functionals, run_ensemble, simulate_path, EnsembleResult, InnerBall, PathState,
    Scheme, SchemeConfig, StepOutcome, Workspace,
};
use spdelab_core::noise::RngStream;
use spdelab_core::{Problem, ScenarioSpec};

fn scenario(
    domain: &str,
    drift: &str,
    diffusion: &str,
    jump: &str,
    noise: &str,
    initial: &str,
    integ: &str,
) -> ScenarioSpec {
    let text = format!(
        "[domain]\n{domain}\n[drift]\n{drift}\n[diffusion]\n{diffusion}\n[jump]\n{jump}\n[noise]\n{noise}\n\
         [initial]\n{initial}\n[integration]\n{integ}\n[monte_carlo]\npaths = 4\nseed = 11\n"
    );
    ScenarioSpec::from_toml(&text).unwrap()
}

const ZERO_NOISE: &str = "kernel = { kind = \"zero\" }\nlevy = { kind = \"zero\" }";

fn heat(nodes: usize, dt: f64, t_end: f64, initial: &str) -> Problem {
    let spec = scenario(
        "kind = \"interval\"\nlength = 1.0",
        "kind = \"zero\"",
        "kind = \"zero\"",
        "kind = \"zero\"",
        ZERO_NOISE,
        initial,
        &format!("nodes = {nodes}\ndt = {dt}\nt_end = {t_end}\ncheckpoint_every = 100"),
    );
    Problem::assemble(&spec).unwrap()
}

fn cfg(p: &Problem) -> SchemeConfig {
    SchemeConfig::from_section(&p.spec.integration)
}

#[test]
fn backward_euler_step_scales_the_eigenfunction() {
    let p = heat(64, 1e-3, 1e-3, "kind = \"principal\"\namplitude = 1.0");
    let scheme = Scheme::new(&p, cfg(&p)).unwrap();
    let mut state = scheme.initial_state(RngStream::new(0, 0));
    let mut ws = Workspace::new(p.grid.len());
    assert_eq!(
        scheme.step(&mut state, &mut ws).unwrap(),
        StepOutcome::Alive
    );
    let factor = 1.0 / (1.0 + p.eig.lambda1 * 1e-3);
    for (u, phi) in state.u.iter().zip(&p.eig.phi) {
        assert!(
            (u - factor * phi).abs() < 1e-9 * phi.abs().max(1e-3),
            "{u} vs {}",
            factor * phi
        );
    }
}

#[test]
fn heat_step_dissipates_mass() {
    let p = heat(50, 1e-3, 1e-2, "kind = \"bump\"\namplitude = 1.0");
    let scheme = Scheme::new(&p, cfg(&p)).unwrap();
    let mut state = scheme.initial_state(RngStream::new(0, 0));
    let mut ws = Workspace::new(p.grid.len());
    let mass = |s: &PathState| {
        s.u.iter()
            .zip(p.grid.weights())
            .map(|(u, w)| u * w)
            .sum::<f64>()
    };
    let mut prev = mass(&state);
    for _ in 0..10 {
        scheme.step(&mut state, &mut ws).unwrap();
        let m = mass(&state);
        assert!(m < prev);
        prev = m;
    }
}

#[test]
fn heat_decay_matches_the_exponential() {
    let p = heat(200, 1e-4, 0.1, "kind = \"bump\"\namplitude = 1.0");
    let scheme = Scheme::new(&p, cfg(&p)).unwrap();
    let path = simulate_path(&scheme, None, 1, 0).unwrap();
    let l2 = path.values.last().unwrap()[2];
    let g = lp_norm(&p.grid, &p.initial, 2.0).unwrap();
    let expected = (-p.eig.lambda1 * 0.1).exp();
    assert!(
        (l2 / g / expected - 1.0).abs() < 0.02,
        "{} vs {expected}",
        l2 / g
    );
    assert_eq!(*path.times.last().unwrap(), 0.1);
}

#[test]
fn backward_euler_converges_at_first_order() {
    let t_end = 0.1;
    let run = |dt: f64| {
        let p = heat(40, dt, t_end, "kind = \"bump\"\namplitude = 1.0");
        let scheme = Scheme::new(&p, cfg(&p)).unwrap();
        let mut state = scheme.initial_state(RngStream::new(0, 0));
        let mut ws = Workspace::new(p.grid.len());
        for _ in 0..scheme.config().n_steps() {
            scheme.step(&mut state, &mut ws).unwrap();
        }
        state.u
    };
    let reference = run(1e-5);
    let err = |dt: f64| {
        run(dt)
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(4e-3), err(2e-3), err(1e-3));
    let order = ((e1 / e2).log2() + (e2 / e3).log2()) / 2.0;
    assert!(order >= 0.9, "observed order {order}");
}

#[test]
fn allen_cahn_zero_state_is_fixed() {
    let spec = scenario(
        "kind = \"ball3d_radial\"\nradius = 1.0",
        "kind = \"allen_cahn\"",
        "kind = \"zero\"",
        "kind = \"zero\"",
        ZERO_NOISE,
        "kind = \"constant\"\nvalue = 0.0",
        "nodes = 32\ndt = 1e-3\nt_end = 0.05\ncheckpoint_every = 10",
    );
    let p = Problem::assemble(&spec).unwrap();
    let scheme = Scheme::new(&p, cfg(&p)).unwrap();
    let path = simulate_path(&scheme, None, 3, 0).unwrap();
    assert!(path.values.iter().flatten().all(|v| *v == 0.0));
}

fn noisy(drift: &str, disable_operator: bool) -> (Problem, SchemeConfig) {
    let spec = scenario(
        "kind = \"interval\"\nlength = 1.0",
        drift,
        "kind = \"power_m\"\nb = 0.5\nm = 1.0",
        "kind = \"z_linear_power\"\nc0 = 0.2\nn = 1.0",
        "kernel = { kind = \"gaussian\", b0 = 1.0, length = 0.3 }\nlevy = { kind = \"exponential\", mass = 2.0, rate = 1.0 }",
        "kind = \"bump\"\namplitude = 1.0",
        "nodes = 20\ndt = 1e-3\nt_end = 0.2\ncheckpoint_every = 50",
    );
    let p = Problem::assemble(&spec).unwrap();
    let mut c = cfg(&p);
    c.disable_operator = disable_operator;
    (p, c)
}

#[test]
fn ensembles_are_identical_across_thread_counts() {
    let (p, c) = noisy("kind = \"zero\"", false);
    let scheme = Scheme::new(&p, c).unwrap();
    let (a, _) = run_ensemble(&scheme, None, 16, 5, Some(1)).unwrap();
    let (b, _) = run_ensemble(&scheme, None, 16, 5, Some(4)).unwrap();
    assert_eq!(a, b);
    let (c2, _) = run_ensemble(&scheme, None, 16, 6, Some(4)).unwrap();
    assert_ne!(a, c2);
}

#[test]
fn identical_paths_have_zero_standard_error() {
    let (p, c) = noisy("kind = \"zero\"", false);
    let scheme = Scheme::new(&p, c).unwrap();
    let path = simulate_path(&scheme, None, 9, 0).unwrap();
    let names = spdelab_core::integrator::functional_names(&scheme.config().p_list, false);
    let r = EnsembleResult::from_paths(9, names, path.times.clone(), &[path.clone(), path]);
    assert!(r.se.iter().flatten().all(|s| *s == 0.0));
}

#[test]
fn deterministic_ensemble_has_zero_standard_error() {
    let p = heat(30, 1e-3, 0.05, "kind = \"bump\"\namplitude = 1.0");
    let scheme = Scheme::new(&p, cfg(&p)).unwrap();
    let (r, _) = run_ensemble(&scheme, None, 5, 1, None).unwrap();
    assert!(r.se.iter().flatten().all(|s| *s == 0.0));
    assert!(r.blowup_fraction.iter().all(|f| *f == 0.0));
}

#[test]
fn noise_integrals_have_zero_mean() {
    let (p, c) = noisy("kind = \"zero\"", true);
    let scheme = Scheme::new(&p, c).unwrap();
    let (r, _) = run_ensemble(&scheme, None, 400, 21, None).unwrap();
    let first = r.mean[0][0];
    for (m, s) in r.mean.iter().zip(&r.se).skip(1) {
        assert!(
            (m[0] - first).abs() <= 5.0 * s[0],
            "drift {} vs se {}",
            m[0] - first,
            s[0]
        );
    }
}

#[test]
fn blowup_is_detected_and_fraction_is_monotone() {
    let spec = scenario(
        "kind = \"interval\"\nlength = 1.0",
        "kind = \"pure_power\"\nalpha = 1.0",
        "kind = \"power_m\"\nb = 0.3\nm = 1.0",
        "kind = \"zero\"",
        "kernel = { kind = \"constant\", value = 1.0 }\nlevy = { kind = \"zero\" }",
        "kind = \"bump\"\namplitude = 60.0",
        "nodes = 16\ndt = 1e-4\nt_end = 0.2\ncheckpoint_every = 20",
    );
    let p = Problem::assemble(&spec).unwrap();
    let scheme = Scheme::new(&p, cfg(&p)).unwrap();
    let (r, paths) = run_ensemble(&scheme, None, 20, 2, None).unwrap();
    assert!(paths.iter().all(|q| q.blew_up));
    for q in &paths {
        let tb = q.blowup_time.unwrap();
        assert!(tb <= 0.2 && q.times.iter().all(|t| *t < tb));
    }
    assert!(r.blowup_fraction.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*r.blowup_fraction.last().unwrap(), 1.0);
    assert_eq!(*r.n_alive.last().unwrap(), 0);
}

#[test]
fn invalid_configs_are_rejected() {
    let p = heat(20, 1e-3, 0.01, "kind = \"bump\"\namplitude = 1.0");
    let mut c = cfg(&p);
    c.blowup_threshold = 0.5;
    assert!(Scheme::new(&p, c).is_err());
    let mut c = cfg(&p);
    c.max_steps = 3;
    assert!(Scheme::new(&p, c).is_err());
    let scheme = Scheme::new(&p, cfg(&p)).unwrap();
    assert!(run_ensemble(&scheme, None, 1, 0, None).is_err());
}

fn ball(nodes: usize) -> Problem {
    let spec = scenario(
        "kind = \"ball3d_radial\"\nradius = 2.0",
        "kind = \"zero\"",
        "kind = \"zero\"",
        "kind = \"zero\"",
        ZERO_NOISE,
        "kind = \"exp_decay\"\na0 = 1.0\nalpha = 1.0",
        &format!("nodes = {nodes}\ndt = 1e-3\nt_end = 0.01"),
    );
    Problem::assemble(&spec).unwrap()
}

#[test]
fn restricted_functionals_degenerate_cases() {
    let p = ball(40);
    let inner = InnerBall::new(&p.grid, 1.0, &p.spec.operator).unwrap();
    assert_eq!(inner.nodes, 20);
    let zero = restricted_ball_functionals(&vec![0.0; 40], &inner, &[1.0, 2.0]);
    assert!(zero.u_hat == 0.0 && zero.lp.iter().all(|v| *v == 0.0));

    let full = InnerBall::new(&p.grid, 2.0, &p.spec.operator).unwrap();
    let r = restricted_ball_functionals(&p.initial, &full, &[2.0]);
    assert!((r.u_hat - p.initial_projection()).abs() < 1e-10);
    assert!((r.lp[0] - lp_norm(&p.grid, &p.initial, 2.0).unwrap()).abs() < 1e-10);

    let mut ext = inner.eig.phi.clone();
    ext.resize(40, 0.0);
    let r = restricted_ball_functionals(&ext, &inner, &[2.0]);
    let direct: f64 = inner
        .grid
        .weights()
        .iter()
        .zip(&inner.eig.phi)
        .map(|(w, f)| w * f * f)
        .sum();
    assert!(r.u_hat > 0.0 && (r.u_hat - direct).abs() < 1e-12 * direct);

    assert!(InnerBall::new(&p.grid, 2.5, &p.spec.operator).is_err());
}
