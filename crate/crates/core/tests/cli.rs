use std::path::Path;
use std::process::{Command, Output};

use psdlra::linalg::read_matrix;
use psdlra::report::{reports_from_json, CSV_COLUMNS};

fn psdlra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psdlra"))
        .args(args)
        .env_remove("PSDLRA_SEED")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(psdlra(&["--help"]).status.code(), Some(0));
    assert_eq!(psdlra(&["lra", "--help"]).status.code(), Some(0));
    assert_eq!(psdlra(&["--version"]).status.code(), Some(0));
    assert_eq!(psdlra(&[]).status.code(), Some(64));
    assert_eq!(psdlra(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(psdlra(&["lra", "--n", "many"]).status.code(), Some(64));
    assert_eq!(psdlra(&["lra", "--family", "nope"]).status.code(), Some(64));
}

#[test]
fn invalid_parameters_exit_one() {
    let out = psdlra(&["lra", "--n", "40", "--k", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn csv_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = psdlra(&["lra", "--n", "128", "--k", "3", "--eps", "0.3", "--seed", "5", "--trials", "2", "--csv", path(p)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS);
    assert_eq!(lines.count(), 2);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    psdlra(&["lra", "--n", "100", "--k", "2", "--eps", "0.4", "--seed", "42", "--csv", path(&a)]);
    let out = Command::new(env!("CARGO_BIN_EXE_psdlra"))
        .args(["lra", "--n", "100", "--k", "2", "--eps", "0.4", "--csv", path(&b)])
        .env("PSDLRA_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn gen_writes_block_instance() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.txt");
    let out = psdlra(&["gen", "--family", "mw_blocks", "--n", "120", "--k", "3", "--eps", "0.25", "--seed", "1", "--out", path(&file)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a = read_matrix(&file).unwrap();
    assert_eq!(a.shape(), (120, 120));
    assert!((0..120).all(|i| a[(i, i)] == 1.0));
    assert_eq!(a, a.transpose());
}

#[test]
fn report_round_trip_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let out = psdlra(&["robust", "--n", "200", "--k", "2", "--eps", "0.3", "--eta", "0.04", "--seed", "3", "--trials", "2", "--out", path(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let reports = reports_from_json(&value).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r.stages.iter().map(|s| s.1).sum::<u64>() == r.queries_total));
    assert_eq!(psdlra(&["verify", "--report", path(&json)]).status.code(), Some(0));

    // a tampered report no longer reproduces
    let tampered = std::fs::read_to_string(&json).unwrap().replacen("\"queries_total\": ", "\"queries_total\": 1", 1);
    std::fs::write(&json, tampered).unwrap();
    assert_eq!(psdlra(&["verify", "--report", path(&json)]).status.code(), Some(2));
}

#[test]
fn sweep_and_pcp_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = psdlra(&["sweep", "--algorithm", "lra", "--param", "n", "--values", "64,128", "--k", "2", "--eps", "0.4", "--trials", "2", "--csv", path(&csv)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);
    let out = psdlra(&["verify-pcp", "--construction", "ridge-column", "--n", "64", "--k", "2", "--eps", "0.5", "--trials", "2", "--projections", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn accept_runs_a_single_criterion() {
    let out = psdlra(&["accept", "--only", "10", "--seed", "1"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("criterion 10") && text.contains("PASS"));
}
