//! End-to-end CLI behavior: exit codes, file outputs, validation.

use std::path::Path;
use std::process::Command;

fn hkflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hkflow"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn equilibrium_power_law_writes_exact_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "eq.json",
        r#"{
            "domain": { "kind": "circle", "length": 1.0, "n_cells": 64 },
            "model": { "name": "power_law", "alpha": 1.0 }
        }"#,
    );
    let out = dir.path().join("out");
    let status = hkflow()
        .args(["equilibrium", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("equilibrium.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,m,f_at_m");
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let m: f64 = fields[1].parse().unwrap();
        assert_eq!(m, 1.0);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["c_star"].as_f64().unwrap(), 0.0);
}

#[test]
fn invalid_alpha_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{
            "domain": { "kind": "circle", "length": 1.0, "n_cells": 16 },
            "model": { "name": "power_law", "alpha": 0.0 }
        }"#,
    );
    let status = hkflow()
        .args(["equilibrium", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{
            "domain": { "kind": "circle", "length": 1.0, "n_cells": 16, "spacing": 0.1 },
            "model": { "name": "power_law", "alpha": 1.0 }
        }"#,
    );
    let status = hkflow()
        .args(["equilibrium", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn w2_mass_mismatch_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dist.json",
        r#"{
            "domain": { "kind": "circle", "length": 1.0, "n_cells": 16 },
            "transport": {
                "kind": "w2", "n_time": 8,
                "rho0": { "expression": "1" },
                "rho1": { "expression": "2" }
            }
        }"#,
    );
    let status = hkflow()
        .args(["distance", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn distance_of_identical_endpoints_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dist.json",
        r#"{
            "domain": { "kind": "circle", "length": 1.0, "n_cells": 24 },
            "transport": {
                "kind": "all", "n_time": 8,
                "rho0": { "expression": "1 + 0.4*cos(2*pi*x)", "normalize": true },
                "rho1": { "expression": "1 + 0.4*cos(2*pi*x)", "normalize": true }
            }
        }"#,
    );
    let out = dir.path().join("out");
    let status = hkflow()
        .args(["distance", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for report in summary["reports"].as_array().unwrap() {
        assert!(report["distance_sq"].as_f64().unwrap() < 1e-6);
    }
    assert_eq!(summary["ordering_ok"], serde_json::Value::Bool(true));
}

#[test]
fn simulate_writes_monotone_entropy_and_conserved_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.json",
        r#"{
            "domain": { "kind": "circle", "length": 1.0, "n_cells": 64 },
            "model": { "name": "power_law", "alpha": 1.0 },
            "flow": { "kind": "spherical", "t_end": 0.1, "snapshot_every": 0.005 },
            "initial": { "expression": "1 + 0.5*cos(2*pi*x)" }
        }"#,
    );
    let out = dir.path().join("out");
    let status = hkflow()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut prev = f64::INFINITY;
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let entropy: f64 = fields[1].parse().unwrap();
        let mass: f64 = fields[4].parse().unwrap();
        assert!(entropy <= prev + 1e-10, "entropy not decreasing");
        assert!((mass - 1.0).abs() <= 1e-12);
        prev = entropy;
    }
    assert!(out.join("snapshots/snap_000000.csv").exists());
}

#[test]
fn mass_recovery_needs_spherical_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.json",
        r#"{
            "domain": { "kind": "circle", "length": 1.0, "n_cells": 32 },
            "model": { "name": "power_law", "alpha": 1.0 },
            "flow": { "kind": "conic", "t_end": 0.05, "snapshot_every": 0.01 },
            "initial": { "expression": "1 + 0.3*cos(2*pi*x)" },
            "mass_recovery": { "m0": 1.0 }
        }"#,
    );
    let status = hkflow()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg("--quiet")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn verify_rejects_unknown_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.json", r#"{ "verify": { "suite": "bogus" } }"#);
    let status = hkflow()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn verify_comparison_suite_passes_and_writes_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.json", r#"{ "verify": { "suite": "comparison" } }"#);
    let out = dir.path().join("out");
    let status = hkflow()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let verdicts = std::fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(verdicts.starts_with("suite,cases,failed,pass"));
    assert!(verdicts.contains("comparison,2,0,1"));
    assert!(out.join("comparison/cases.csv").exists());
}
