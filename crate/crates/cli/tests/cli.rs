use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use serde_json::Value;
use tmedia::config::RunConfig;
use tmedia::run::{execute, RunOptions};
use tmedia_core::io::{read_csv, write_csv};
use tmedia_core::{Grid, GridSpec, ScalarField};

const TORSION: &str = "torsion-ball:N=2,R=1,m=1,n=256";

fn tmedia(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tmedia")).args(args).output().expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().expect("exit code"), text)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn check<'a>(r: &'a Value, name: &str) -> Vec<&'a Value> {
    r["checks"].as_array().unwrap().iter().filter(|c| c["name"] == name).collect()
}

fn write_config(dir: &Path, cfg: &Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn torsion_fixture_reports_plateau_and_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let (code, text) = tmedia(&["run", "--fixture", TORSION, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["status"], "pass");
    assert!(check(&r, "plateau").iter().all(|c| c["pass"] == true) && !check(&r, "plateau").is_empty());
    let trace = r["diagnostics"]["trace"]["mean_trace"].as_f64().unwrap();
    assert!((trace + 0.5).abs() <= 0.05, "mean trace {trace}");
    let entries = r["sweep"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 14);
    for e in entries {
        assert!(out.join(e["field_file"].as_str().unwrap()).is_file());
    }
    assert!(out.join("plots/solution.svg").is_file() && out.join("plots/convergence.svg").is_file());
}

#[test]
fn radial_power_records_max_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, text) =
        tmedia(&["run", "--fixture", "radial-power:N=2,m=1,theta=1,R=1,n=512", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let err = report(tmp.path())["exact"]["max_error"].as_f64().unwrap();
    assert!(err <= 5e-2, "max error {err}");
}

#[test]
fn constant_zero_config_passes_trivially() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "data": {"grid": {"kind": "radial_ball", "dim": 2, "radius": 1.0, "cells": 64}, "f": {"constant": 0.0}},
        "output_dir": tmp.path().join("zero"),
    });
    let (code, text) = tmedia(&["run", "--config", &write_config(tmp.path(), &cfg), "--no-plots"]);
    assert_eq!(code, 0, "{text}");
    let r = report(&tmp.path().join("zero"));
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert!(r["sweep"]["entries"].as_array().unwrap().iter().all(|e| e["max"] == 0.0 && e["min"] == 0.0));
    assert!(!tmp.path().join("zero/plots").exists());
}

#[test]
fn csv_dumps_round_trip_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let name = "torsion-ball:N=3,R=1,m=2,n=64";
    let (code, text) = tmedia(&["run", "--fixture", name, "--out", tmp.path().to_str().unwrap(), "--no-plots"]);
    assert_eq!(code, 0, "{text}");
    let outcome = execute(&RunConfig::for_fixture(name), RunOptions::default()).unwrap();
    let sweep = outcome.sweep.unwrap();
    let grid = outcome.problem.grid.clone();
    for (k, sol) in sweep.solutions.iter().enumerate() {
        let file = std::fs::File::open(tmp.path().join(format!("fields/u_{k:02}.csv"))).unwrap();
        let back = read_csv(grid.clone(), file).unwrap();
        let same = back.values().iter().zip(sol.u.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "dump {k} differs");
    }
}

#[test]
fn inline_csv_data_resolves_relative_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = Arc::new(Grid::new(GridSpec::rectangle(1.0, 1.0, 8, 8)).unwrap());
    let f = ScalarField::constant(grid, 1.0);
    write_csv(&f, std::fs::File::create(tmp.path().join("f.csv")).unwrap()).unwrap();
    let cfg = serde_json::json!({
        "data": {"grid": {"kind": "rectangle", "lx": 1.0, "ly": 1.0, "nx": 8, "ny": 8}, "f": {"csv": "f.csv"}},
        "solver": {"newton_tol": 1e-9},
    });
    let out = tmp.path().join("out");
    let (code, text) = tmedia(&["run", "--config", &write_config(tmp.path(), &cfg), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let r = report(&out);
    assert_eq!(r["solver"]["newton_tol"], 1e-9);
    assert_eq!(r["sweep"]["entries"].as_array().unwrap().len(), 14);
    assert!(r["sweep"]["entries"][13]["min"].as_f64().unwrap() > 0.0);
}

#[test]
fn reports_are_deterministic_apart_from_timings() {
    let tmp = tempfile::tempdir().unwrap();
    let strip = |dir: &Path| {
        let mut r = report(dir);
        r.as_object_mut().unwrap().remove("timings");
        r
    };
    for sub in ["a", "b"] {
        let dir = tmp.path().join(sub);
        let (code, _) = tmedia(&["run", "--fixture", "torsion-ball:N=2,n=64", "--out", dir.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    assert_eq!(strip(&tmp.path().join("a")), strip(&tmp.path().join("b")));
}

#[test]
fn flipped_flux_sign_is_an_assertion_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _) =
        tmedia(&["run", "--fixture", TORSION, "--out", tmp.path().to_str().unwrap(), "--inject-flux-sign-flip"]);
    assert_eq!(code, 1);
    let r = report(tmp.path());
    assert_eq!(r["status"], "assertion_failure");
    assert_eq!(r["diagnostics"]["flux_sign_flipped"], true);
    assert!(check(&r, "trace_sign").iter().any(|c| c["pass"] == false));
}

#[test]
fn configuration_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(tmedia(&["run", "--fixture", "no-such-fixture", "--out", out]).0, 2);
    assert_eq!(tmedia(&["run", "--fixture", "torsion-ball:n=16", "--slack", "0.5", "--out", out]).0, 2);
    let both = serde_json::json!({"fixture": "zero", "data": {"grid": {"kind": "radial_ball", "dim": 2, "radius": 1.0, "cells": 8}, "f": {"constant": 1.0}}});
    assert_eq!(tmedia(&["run", "--config", &write_config(tmp.path(), &both), "--out", out]).0, 2);
    let typo = serde_json::json!({"fixture": "zero", "slak": 2.0});
    assert_eq!(tmedia(&["run", "--config", &write_config(tmp.path(), &typo), "--out", out]).0, 2);
    assert_eq!(tmedia(&["run", "--config", "/nonexistent/config.json", "--out", out]).0, 2);
    assert_eq!(tmedia(&["run", "--out", out]).0, 2);
}

#[test]
fn solver_failure_exits_with_3_and_keeps_the_partial_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "fixture": "torsion-ball:N=2,n=64",
        "solver": {"max_newton": 2, "picard_fallback": false},
    });
    let out = tmp.path().join("out");
    let (code, text) = tmedia(&["run", "--config", &write_config(tmp.path(), &cfg), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{text}");
    let r = report(&out);
    assert_eq!(r["status"], "non_convergence");
    assert!(r["sweep"]["failure"]["message"].is_string());
}
