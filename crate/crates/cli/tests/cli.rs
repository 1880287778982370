use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use l1stab::certify;
use l1stab::harness::{self, EnsembleSpec};
use l1stab::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_l1stab"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn certified_matrix(dir: &Path) -> PathBuf {
    let spec = EnsembleSpec::gaussian(4, 8, 1, 40, 11);
    let a = (0..spec.count)
        .map(|i| harness::gen_one(&spec, i).unwrap())
        .find(|a| certify::certify_weak_rsp(a, 1).unwrap().holds())
        .expect("some 4x8 gaussian has the weak RSP of order 1");
    let p = dir.join("a.txt");
    io::write_matrix(&p, a.a()).unwrap();
    p
}

#[test]
fn certify_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    certified_matrix(dir.path());
    let out = run(dir.path(), &["certify", "--matrix", "a.txt", "--k", "1", "--json", "c.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(v["k"], 1);
    assert_eq!(v["report"]["weak_rsp"], "Holds");
}

#[test]
fn solve_reports_ladder_for_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "2 3\n1 0 1\n0 1 1\n").unwrap();
    fs::write(dir.path().join("y.txt"), "1\n1\n").unwrap();
    let out = run(dir.path(), &["solve", "--matrix", "a.txt", "--y", "y.txt", "--norm", "eq", "--json", "-"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout[out.stdout.iter().position(|&b| b == b'{').unwrap()..]).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let out = run(dir.path(), &["solve", "--matrix", "a.txt", "--y", "y.txt", "--norm", "two", "--eps", "0.1", "--schedule", "16,32", "--json", "s.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert!(v["ladder"].as_array().unwrap().len() >= 1);
    assert!(v["x_star"].as_array().unwrap().len() == 3);
}

#[test]
fn bad_norm_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "1 2\n1 1\n").unwrap();
    fs::write(dir.path().join("y.txt"), "1\n").unwrap();
    let out = run(dir.path(), &["solve", "--matrix", "a.txt", "--y", "y.txt", "--norm", "l3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn polytope_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["polytope", "--m", "2", "--k", "8", "--json", "p.json", "--csv", "p.csv"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    let expect = 1.0 / (std::f64::consts::PI / 8.0).cos() - 1.0;
    assert!((v["hausdorff"].as_f64().unwrap() - expect).abs() < 1e-12);
    assert_eq!(fs::read_to_string(dir.path().join("p.csv")).unwrap().lines().count(), 9);
}

#[test]
fn bound_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    certified_matrix(dir.path());
    let out = run(dir.path(), &["bound", "--theorem", "3.2", "--matrix", "a.txt", "--k", "1", "--trials", "3", "--seed", "4", "--csv", "out.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "trial,sigma_k,epsilon,distance,bound_factor,empirical_gamma,feasible");
    assert_eq!(lines.count(), 3);
    let out = run(dir.path(), &["bound", "--theorem", "3.3", "--matrix", "a.txt", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn phase_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["phase", "--n", "6", "--k", "1", "--m", "1..3", "--per-point", "5", "--csv", "ph.csv"]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("ph.csv")).unwrap().lines().count(), 4);
}

#[test]
fn run_smoke_determinism_and_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    certified_matrix(dir.path());
    fs::write(dir.path().join("exp.cfg"), "matrix = a.txt\nk = 1\ntheorem = 3.2\ntrials = 10\n").unwrap();
    let out = run(dir.path(), &["run", "exp.cfg", "--out-dir", "r1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<_> = fs::read_dir(dir.path().join("r1")).unwrap().collect();
    assert_eq!(files.len(), 2);
    let out = run(dir.path(), &["run", "exp.cfg", "--out-dir", "r2"]);
    assert!(out.status.success());
    let a = fs::read(dir.path().join("r1/experiment.csv")).unwrap();
    let b = fs::read(dir.path().join("r2/experiment.csv")).unwrap();
    assert_eq!(a, b);

    fs::write(dir.path().join("bad.cfg"), "matrix = a.txt\nnorm = euclid\n").unwrap();
    let out = run(dir.path(), &["run", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`norm`"));
}

#[test]
fn missing_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["certify", "--matrix", "nope.txt", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
