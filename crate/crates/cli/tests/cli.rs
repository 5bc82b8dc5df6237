use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_cocontact");

fn run(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("COCONTACT_OUT_DIR");
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn inline_constraints_report_matches_golden() {
    let o = run(&["constraints", "--config", &data("degenerate.json")], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got: Value = serde_json::from_slice(&o.stdout).unwrap();
    let want: Value = serde_json::from_str(&fs::read_to_string(data("degenerate_constraints.json")).unwrap()).unwrap();
    assert_eq!(got, want);
}

#[test]
fn charged_ladder_exit_codes() {
    let o = run(&["constraints", "--system", "charged_particle"], None);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["status"], "Closed");
    assert_eq!(run(&["constraints", "--system", "charged", "--max-generations", "2"], None).status.code(), Some(3));
}

#[test]
fn harmonic_returns_after_one_period() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--system", "harmonic", "--t-end", "6.283185307179586"], Some(dir.path()));
    assert_eq!(code(&o), 0);
    let (header, rows) = read_rows(&dir.path().join("harmonic_unified.csv"));
    assert_eq!(&header[..5], ["t", "q1", "v1", "p1", "s"]);
    let (first, last) = (&rows[0], rows.last().unwrap());
    assert!((last[0] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    assert!((last[1] - first[1]).abs() <= 1e-6 && (last[2] - first[2]).abs() <= 1e-6);
}

#[test]
fn charged_simulation_follows_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--system", "charged_particle", "--t-end", "0.5"], Some(dir.path()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_rows(&dir.path().join("charged_particle_unified.csv"));
    let z = header.iter().position(|h| h == "q3").unwrap();
    assert!(rows.len() > 10);
    for r in &rows {
        assert!((r[z] - r[0]).abs() <= 1e-8);
    }
}

#[test]
fn singular_systems_have_no_lagrangian_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["simulate", "--system", "charged_particle", "--space", "lagrangian", "--t-end", "0.1"],
        Some(dir.path()),
    );
    assert_eq!(code(&o), 4);
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn all_spaces_write_consistent_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--system", "duffing", "--t-end", "1", "--space", "all"], Some(dir.path()));
    assert_eq!(code(&o), 0);
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["equivalence"]["rho1_vs_x"].as_f64().unwrap() <= 1e-6);
    let (_, unified) = read_rows(&dir.path().join("duffing_unified.csv"));
    for space in ["lagrangian", "hamiltonian"] {
        let (_, rows) = read_rows(&dir.path().join(format!("duffing_{space}.csv")));
        assert_eq!(rows.len(), unified.len());
        for (a, b) in rows.iter().zip(&unified) {
            for k in 0..5 {
                assert!((a[k] - b[k]).abs() <= 1e-6, "{space}");
            }
        }
    }
}

#[test]
fn output_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["simulate", "--system", "free_particle", "--t-end", "0.5"])
        .env("COCONTACT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let (_, rows) = read_rows(&dir.path().join("free_particle_unified.csv"));
    assert_eq!(rows.len(), 501);
}

#[test]
fn verify_exit_codes() {
    assert_eq!(code(&run(&["verify", "--system", "duffing", "--points", "10"], None)), 0);
    assert_ne!(
        code(&run(&["verify", "--system", "duffing", "--points", "10", "--tolerance", "1e-15"], None)),
        0
    );
    let o = run(&["verify", "--system", "harmonic", "--points", "10", "--json"], None);
    assert_eq!(code(&o), 0);
    assert!(serde_json::from_slice::<Value>(&o.stdout).is_ok());
}

#[test]
fn sweep_runs_each_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["sweep", "--system", "harmonic", "--param", "alpha", "--values", "1,4", "--t-end", "1"],
        Some(dir.path()),
    );
    assert_eq!(code(&o), 0);
    let runs: Value = serde_json::from_slice(&o.stdout).unwrap();
    let runs = runs.as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for (run, omega) in runs.iter().zip([1.0f64, 2.0]) {
        let q = run["final_point"][1].as_f64().unwrap();
        assert!((q - omega.cos()).abs() <= 1e-6);
    }
    assert!(dir.path().join("harmonic_sweep_1.csv").exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"system": {"preset": "duffing"}, "bogus": 1}"#).unwrap();
    assert_eq!(code(&run(&["simulate", "--config", bad.to_str().unwrap()], None)), 1);
    assert_eq!(code(&run(&["simulate", "--system", "pendulum"], None)), 1);
    assert_eq!(code(&run(&["frobnicate"], None)), 1);
    assert_eq!(code(&run(&["simulate", "--system", "duffing", "--step", "-1"], None)), 1);
    assert_eq!(code(&run(&["--help"], None)), 0);
}
