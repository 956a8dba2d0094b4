use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn noisestab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisestab"))
        .args(args)
        .env_remove("NOISESTAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("json line"))
        .collect()
}

#[test]
fn alpha_two_is_closed_form() {
    let out = noisestab(&["alpha", "--q", "2"]);
    assert!(out.status.success());
    let r = &records(&out)[0];
    assert_eq!(r["method"], "closed_form");
    assert!((r["alpha"].as_f64().unwrap() - 0.878567).abs() < 1e-6);
}

#[test]
fn orthant_closed_form() {
    let out = noisestab(&["orthant", "--rho", "0.5"]);
    let r = &records(&out)[0];
    assert!((r["value"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    let out = noisestab(&["orthant", "--rho", "-0.5", "--a", "0", "--b", "0"]);
    let r = &records(&out)[0];
    assert!((r["value"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = ["--seed", "7", "--samples", "200000", "condorcet", "--k", "3", "--n", "101"];
    let a = noisestab(&args);
    let b = noisestab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let r = &records(&a)[0];
    assert_eq!(r["params"]["seed"], 7);
    assert_eq!(r["params"]["samples"], 200000);
    let v = r["value"].as_f64().unwrap();
    assert!((v - 0.9123).abs() < 0.01, "{v}");
}

#[test]
fn worker_count_changes_nothing_but_the_echo() {
    let base = ["--seed", "3", "--samples", "1e5", "--workers", "16", "coin", "--k", "3", "--n", "11"];
    let a = records(&noisestab(&base));
    let mut env_run = Command::new(env!("CARGO_BIN_EXE_noisestab"));
    env_run.args(["--seed", "3", "--samples", "1e5", "coin", "--k", "3", "--n", "11"]);
    env_run.env("NOISESTAB_WORKERS", "16");
    let b = records(&env_run.output().unwrap());
    assert_eq!(a[0]["value"], b[0]["value"]);
    assert_eq!(b[0]["params"]["workers"], 16);
}

#[test]
fn exit_codes() {
    assert_eq!(noisestab(&["selftest"]).status.code(), Some(0));
    assert_eq!(noisestab(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(noisestab(&["--help"]).status.code(), Some(0));
    let bad = noisestab(&["condorcet", "--k", "1"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("k >= 2"));
    assert_eq!(noisestab(&["orthant", "--rho", "1.5"]).status.code(), Some(1));
}

#[test]
fn csv_output_has_header() {
    let out = noisestab(&["--format", "csv", "orthant", "--rho", "0"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(header.contains(&"value"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn graph_file_solve_and_round() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("k4.txt");
    fs::write(&graph, "# vertices 4\n0 1 1\n0 2 1\n0 3 1\n1 2 1\n1 3 1\n2 3 1\n").unwrap();
    let g = graph.to_str().unwrap();
    let out = noisestab(&["maxqcut-solve", "--graph", g, "--q", "3", "--brute"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &records(&out)[0];
    assert_eq!(r["opt"].as_f64().unwrap(), 5.0);
    assert!((r["solution"]["objective"].as_f64().unwrap() - 16.0 / 3.0).abs() < 1e-4);
    assert_eq!(r["relaxation_ok"], true);

    let out = noisestab(&["--seed", "1", "maxqcut-round", "--graph", g, "--q", "3", "--repeats", "2000"]);
    assert!(out.status.success());
    let r = &records(&out)[0];
    let best = r["rounding"]["best_value"].as_f64().unwrap();
    assert!((4.0..=5.0 + 1e-12).contains(&best));
}

#[test]
fn ulc_reduce_writes_graph_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("red.txt");
    let ulc = dir.path().join("ulc.json");
    let out = noisestab(&[
        "ulc-reduce",
        "--random",
        "2,3,4,2",
        "--q",
        "3",
        "--rho",
        "-0.5",
        "--graph",
        graph.to_str().unwrap(),
        "--save-ulc",
        ulc.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &records(&out)[0];
    assert_eq!(r["exact_completeness_holds"], true);
    assert_eq!(r["decoded_value"].as_f64(), Some(1.0));
    assert!(graph.exists());
    assert!(dir.path().join("red.txt.meta.json").exists());

    // Reducing the saved instance again gives the same graph.
    let graph2 = dir.path().join("red2.txt");
    let out = noisestab(&[
        "ulc-reduce",
        "--ulc",
        ulc.to_str().unwrap(),
        "--q",
        "3",
        "--rho",
        "-0.5",
        "--graph",
        graph2.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(&graph).unwrap(), fs::read(&graph2).unwrap());
}

#[test]
fn missing_graph_file_is_an_error() {
    let out = noisestab(&["maxqcut-solve", "--graph", "/nonexistent/graph.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alpha.jsonl");
    let out = noisestab(&["--out", path.to_str().unwrap(), "alpha", "--q", "2"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&path).unwrap();
    let v: Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(v["q"], 2);
}
