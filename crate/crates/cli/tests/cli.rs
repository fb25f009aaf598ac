//! End-to-end runs of the binary.

use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distham")).args(args).output().unwrap()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn field_reports_constrained_velocity_and_force() {
    let out = run(&["field", "particle", "--q", "0,1,0", "--u", "2,3"]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    let q_dot: Vec<f64> = serde_json::from_value(v["ambient"]["q_dot"].clone()).unwrap();
    let p_dot: Vec<f64> = serde_json::from_value(v["ambient"]["p_dot"].clone()).unwrap();
    for (a, b) in q_dot.iter().zip([2.0, 3.0, 2.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in p_dot.iter().zip([-3.0, 0.0, 3.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(v["projection_gap"].as_f64().unwrap() < 1e-12);
}

#[test]
fn simulate_writes_header_and_one_row_per_step() {
    let out = run(&["simulate", "disk", "--q", "0,0,0,0", "--u", "1,0.5", "--t", "0.1", "--dt", "0.01", "--action", "SE2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    assert!(header.contains(&"H") && header.contains(&"constraint_residual"));
    assert_eq!(header.len(), 1 + 4 + 2 + 4 + 2 + 3);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    let last: Vec<f64> = rows[10].split(',').map(|s| s.parse().unwrap()).collect();
    assert!((last[0] - 0.1).abs() < 1e-12);
    let diag = json(&out.stderr);
    assert!(diag["energy_drift"].as_f64().unwrap() < 1e-10);
}

#[test]
fn check_hj_passes_for_a_closed_section() {
    let out = run(&["check-hj", "particle", "--gamma", "2/sqrt(1+y^2),3,2*y/sqrt(1+y^2)", "--points", "20"]);
    let v = json(&out.stdout);
    assert_eq!(v["status"], "PASS", "{v}");
    assert!(out.status.success());
}

#[test]
fn check_hj_fails_for_an_open_section() {
    let out = run(&["check-hj", "particle", "--gamma", "2,3,2*y", "--points", "20"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out.stdout)["status"], "FAIL");
}

#[test]
fn reduce_and_analyze_succeed_on_the_disk() {
    let out = run(&["reduce", "disk", "--chart", "disk-SE2", "--points", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["analyze", "disk", "--q", "0.1,0.2,0.3,0.4"]);
    assert!(out.status.success());
    assert_eq!(json(&out.stdout)["bracket_generating"]["generating"], true);
}

#[test]
fn examples_lists_bundled_configs() {
    let out = run(&["examples"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("particle") && text.contains("disk"));
    let out = run(&["examples", "--show", "disk"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("[constraints]"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["field", "particle", "--q", "0,1"]).status.code(), Some(1));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    let missing = run(&["field", "no-such-system", "--q", "0", "--u", "0"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(json(&missing.stderr)["error"]["exit_code"], 2);
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
