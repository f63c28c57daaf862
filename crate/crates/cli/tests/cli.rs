use std::f64::consts::{LN_2, PI};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spdelab_cli::canned::canned;
use spdelab_core::ScenarioSpec;

fn spdelab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdelab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn spdelab")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const LN2_SCENARIO: &str = r#"
[domain]
kind = "interval"
length = 3.141592653589793

[drift]
kind = "power_drift"
a1 = 1.0
a2 = 0.0
beta = 2.0

[diffusion]
kind = "zero"

[jump]
kind = "zero"

[noise]
kernel = { kind = "zero" }
levy = { kind = "zero" }

[initial]
kind = "constant"
value = 2.0

[integration]
nodes = 400
dt = 1e-3
t_end = 1.0

[monte_carlo]
paths = 2
seed = 7
"#;

#[test]
fn eig_on_pi_interval() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    fs::write(&scenario, LN2_SCENARIO).unwrap();
    let out = spdelab(
        &["eig", "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let eig = read_json(&dir.path().join("eig.json"));
    assert!((eig["lambda1"].as_f64().unwrap() - 1.0).abs() < 1e-4);
    assert!((eig["phi_integral"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(eig["manifest"]["subcommand"], "eig");
    assert_eq!(eig["manifest"]["config_hash"].as_str().unwrap().len(), 64);
    let phi = fs::read_to_string(dir.path().join("phi.csv")).unwrap();
    assert!(phi.lines().count() > 400);
}

#[test]
fn bound_reproduces_ln2() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    fs::write(&scenario, LN2_SCENARIO).unwrap();
    let out = spdelab(
        &["bound", "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let b = read_json(&dir.path().join("bound.json"));
    let mean = &b["mean_blowup"];
    assert_eq!(mean["applicable"], true);
    // discrete lambda1 differs from 1 by O(h^2)
    let t = mean["t_upper"].as_f64().unwrap();
    assert!((t - LN_2).abs() < 1e-4, "t_upper = {t}");
    assert!((mean["initial_value"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    assert!(b.get("mean_square_blowup").is_none());
}

#[test]
fn missing_field_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("broken.toml");
    fs::write(&scenario, LN2_SCENARIO.replace("dt = 1e-3\n", "")).unwrap();
    let out = spdelab(
        &["eig", "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));
}

#[test]
fn unknown_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("broken.toml");
    fs::write(
        &scenario,
        LN2_SCENARIO.replace("seed = 7", "seed = 7\nsede = 8"),
    )
    .unwrap();
    let out = spdelab(
        &["check", "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sede"));
}

#[test]
fn unknown_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = spdelab(&["simulate", "--scenario", "no_such_thing"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("example_4_1"));
}

#[test]
fn invalid_override_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = spdelab(
        &["simulate", "--scenario", "heat_benchmark", "--dt", "-1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn indefinite_covariance_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = spdelab(
        &["simulate", "--scenario", "example_4_2", "--paths", "2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("indefinite"));
}

#[test]
fn canned_scenarios_round_trip() {
    for name in spdelab_cli::canned::names() {
        let spec = ScenarioSpec::from_toml(canned(name).unwrap()).unwrap();
        let again = ScenarioSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(spec.to_toml().unwrap(), again.to_toml().unwrap(), "{name}");
    }
}

#[test]
fn scenarios_subcommand_lists_and_prints() {
    let dir = tempfile::tempdir().unwrap();
    let list = Command::new(env!("CARGO_BIN_EXE_spdelab"))
        .arg("scenarios")
        .output()
        .unwrap();
    let names = String::from_utf8(list.stdout).unwrap();
    assert!(names.lines().any(|l| l == "allen_cahn_5_1"));
    let one = Command::new(env!("CARGO_BIN_EXE_spdelab"))
        .args(["scenarios", "heat_benchmark"])
        .output()
        .unwrap();
    let text = String::from_utf8(one.stdout).unwrap();
    assert_eq!(text, canned("heat_benchmark").unwrap());
    let bad = spdelab(&["eig", "--scenario", "nope"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn check_reports_violation_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let text = canned("example_4_1")
        .unwrap()
        .replace("gamma0 = 0.05", "gamma0 = 2.0")
        .replace("b1 = 0.00125", "b1 = 2.0");
    let scenario = dir.path().join("loud.toml");
    fs::write(&scenario, text).unwrap();
    let out = spdelab(
        &["check", "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c = read_json(&dir.path().join("check.json"));
    let a2 = c["positivity_conditions"]["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["condition"] == "A2")
        .unwrap()
        .clone();
    assert_eq!(a2["verdict"], "violated");
    let w = &a2["witness"];
    assert!(w["lhs"].as_f64().unwrap() > w["rhs"].as_f64().unwrap());
    assert_eq!(w["at"]["kind"], "state");
}

#[test]
fn simulate_output_is_stamped_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str, threads: &str| {
        let out_dir = dir.path().join(tag);
        let out = spdelab(
            &[
                "simulate",
                "--scenario",
                "example_4_1",
                "--paths",
                "8",
                "--t-end",
                "0.005",
                "--threads",
                threads,
            ],
            &out_dir,
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read_to_string(out_dir.join("ensemble.csv")).unwrap()
    };
    let one = run("one", "1");
    let three = run("three", "3");
    assert_eq!(one, three);
    let header = one.lines().next().unwrap();
    assert!(header.starts_with("# spdelab "));
    assert!(header.contains("config_hash=") && header.ends_with("seed=20240401"));
    assert_eq!(
        one.lines().nth(1).unwrap(),
        "t,name,mean,se,blowup_fraction,n_alive"
    );

    let other = dir.path().join("seeded");
    spdelab(
        &[
            "simulate",
            "--scenario",
            "example_4_1",
            "--paths",
            "8",
            "--t-end",
            "0.005",
            "--seed",
            "1",
        ],
        &other,
    );
    let seeded = fs::read_to_string(other.join("ensemble.csv")).unwrap();
    assert_ne!(one, seeded);
}

#[test]
fn eig_matches_pi_squared_on_unit_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out = spdelab(&["eig", "--scenario", "heat_benchmark"], dir.path());
    assert!(out.status.success());
    let eig = read_json(&dir.path().join("eig.json"));
    assert!((eig["lambda1"].as_f64().unwrap() - PI * PI).abs() < 1e-2);
}

#[test]
fn bound_below_threshold_is_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    fs::write(
        &scenario,
        LN2_SCENARIO.replace("value = 2.0", "value = 0.5"),
    )
    .unwrap();
    let out = spdelab(
        &["bound", "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let b = read_json(&dir.path().join("bound.json"));
    assert_eq!(b["mean_blowup"]["applicable"], false);
    assert!(b["mean_blowup"]["t_upper"].is_null());
    assert_eq!(
        b["manifest"]["output_dir"],
        dir.path().display().to_string()
    );
}
