use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cbf(args: &[&str], config: &str, dir: &Path) -> (Output, PathBuf) {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_cbf"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (output, out)
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn invalid_alpha_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = cbf(
        &["kernels"],
        r#"{"spec": {"family": "stable", "alpha": 1.5}, "grid": {"T": 1.0, "n": 64}}"#,
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = cbf(
        &["kernels"],
        r#"{"spec": {"family": "stable", "alpha": 0.5}, "grid": {"T": 1.0, "n": 64}, "gird": 1}"#,
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stable_kernels_report() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = cbf(
        &["kernels"],
        r#"{"spec": {"family": "stable", "alpha": 0.5}, "grid": {"T": 1.0, "n": 2048}}"#,
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out, "kernels.json");
    let q = r["result"]["q"].as_f64().unwrap();
    assert!((q - 0.6366197724).abs() < 1e-10);
    assert!(r["result"]["sonine_deviation"].as_f64().unwrap() <= 1e-6);
    assert!(r["result"].get("warning").is_none());
    assert!(out.join("kernels.csv").exists());
}

#[test]
fn mismatched_kernels_warn_but_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = cbf(
        &["kernels"],
        r#"{"spec": {"family": "stable", "alpha": 0.5}, "grid": {"T": 1.0, "n": 256},
            "kernels": {"mismatched_density": {"family": "stable", "alpha": 0.75}}}"#,
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out, "kernels.json");
    assert!(r["result"]["sonine_deviation"].as_f64().unwrap() > 0.1);
    assert!(r["result"]["warning"].is_string());
}

#[test]
fn violated_contraction_exits_with_numeric_code() {
    // tail from α = 0.75 with density from α = 0.5 makes μ̄P blow up at 0
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = cbf(
        &["solve"],
        r#"{"spec": {"family": "stable", "alpha": 0.75}, "grid": {"T": 1.0, "n": 64},
            "kernels": {"mismatched_density": {"family": "stable", "alpha": 0.5}},
            "solver": {"lambda": -1.0, "phi0": 1.0}}"#,
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("hypothesis q<1 violated"), "{}", stderr(&o));
}

#[test]
fn trivial_solve_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = cbf(
        &["solve"],
        r#"{"spec": {"family": "stable", "alpha": 0.5}, "grid": {"T": 1.0, "n": 64},
            "solver": {"lambda": 0.0, "phi0": 1.0, "g": {"kind": "constant", "value": 0.0}}}"#,
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "phi").unwrap();
    let mut rows = 0;
    for line in lines {
        let v: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert_eq!(v, 1.0);
        rows += 1;
    }
    assert_eq!(rows, 65);
}

#[test]
fn decaying_resolvent_lies_in_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = cbf(
        &["solve"],
        r#"{"spec": {"family": "stable", "alpha": 0.5}, "grid": {"T": 1.0, "n": 256},
            "solver": {"lambda": -1.0, "phi0": 1.0}}"#,
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out, "solve.json");
    assert!(r["result"]["diagnostics"]["residual"].is_number());
    let end = r["result"]["phi_at_end"].as_f64().unwrap();
    assert!(end > 0.0 && end <= 1.0);
}

#[test]
fn zero_paths_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = cbf(
        &["simulate"],
        r#"{"spec": {"family": "stable", "alpha": 0.5},
            "sim": {"x0": 1.0, "dt": 0.001, "n_paths": 0, "seed": 1}}"#,
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn simulate_is_reproducible_and_terminates() {
    let config = r#"{"spec": {"family": "stable", "alpha": 0.5},
        "sim": {"x0": 1.0, "dt": 0.001, "n_paths": 10000, "seed": 3}}"#;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (oa, outa) = cbf(&["simulate"], config, a.path());
    let (ob, outb) = cbf(&["simulate"], config, b.path());
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(ob.status.code(), Some(0));
    for name in ["simulate.json", "paths.csv"] {
        assert_eq!(std::fs::read(outa.join(name)).unwrap(), std::fs::read(outb.join(name)).unwrap(), "{name}");
    }
    let r = report(&outa, "simulate.json");
    assert!(r["result"]["terminated_fraction"].as_f64().unwrap() >= 0.999);
}

#[test]
fn seed_flag_changes_the_estimate() {
    let config = r#"{"spec": {"family": "stable", "alpha": 0.5},
        "sim": {"x0": 1.0, "dt": 0.001, "n_paths": 500, "seed": 3}}"#;
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = cbf(&["simulate"], config, dir.path());
    let first = report(&out, "simulate.json");
    let (_, out) = cbf(&["simulate", "--seed", "4"], config, dir.path());
    let second = report(&out, "simulate.json");
    assert_ne!(first["result"]["estimate"], second["result"]["estimate"]);
}

#[test]
fn compare_negative_control_fails() {
    let config = r#"{"spec": {"family": "stable", "alpha": 0.5}, "grid": {"T": 1.0, "n": 256},
        "solver": {"lambda": -1.0},
        "sim": {"x0": 1.0, "dt": 0.001, "n_paths": 2000, "seed": 5},
        "compare": {"identities": ["censored_potential", "lifetime_laplace"]}}"#;
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = cbf(&["compare"], config, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(&out, "compare.json")["result"]["all_pass"], Value::Bool(true));

    let shifted = config.replace(r#""lifetime_laplace"]"#, r#""lifetime_laplace"], "analytic_offset": 0.5"#);
    let (o, out) = cbf(&["compare"], &shifted, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out, "compare.json");
    assert_eq!(r["result"]["all_pass"], Value::Bool(false));
    assert!(r["result"]["comparisons"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == Value::Bool(false)));
}
