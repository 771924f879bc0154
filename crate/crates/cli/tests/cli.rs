use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn swirlmhd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swirlmhd"))
        .args(args)
        .current_dir(cwd)
        .env("SWIRLMHD_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let text = format!("grid.Nr = 16\ngrid.Nz = 16\nstepper.dt = 0.01\n{extra}");
    fs::write(dir.join("run.cfg"), text).unwrap();
    "run.cfg".to_string()
}

#[test]
fn verify_exponents_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = swirlmhd(&["verify", "exponents"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[C1] exponent endpoints: PASS"));
    assert!(text.contains("epsilon(63/61) = 1/7"));
}

#[test]
fn verify_reports_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = swirlmhd(&["verify", "lp", "--seed", "11", "--report", "a.txt"], tmp.path());
    let b = swirlmhd(&["verify", "lp", "--seed", "11"], tmp.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(fs::read(tmp.path().join("a.txt")).unwrap(), a.stdout);
}

#[test]
fn simulate_zero_horizon_writes_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "stepper.t_end = 0\noutput.dir = out\n");
    let out = swirlmhd(&["simulate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("out/diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(tmp.path().join("out/B.snap").exists());
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "stepper.t_end = 0.05\nstepper.sample_every = 1\n");
    for dir in ["x", "y"] {
        let out = swirlmhd(&["simulate", &cfg, "--out", dir], tmp.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("diagnostics.csv")).unwrap();
    assert_eq!(read("x"), read("y"));
}

#[test]
fn invalid_config_reports_line_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "p = 1.5\n");
    let out = swirlmhd(&["simulate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn missing_config_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = swirlmhd(&["simulate", "absent.cfg"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn norms_of_a_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "stepper.t_end = 0\n");
    assert_eq!(swirlmhd(&["simulate", &cfg, "--out", "o"], tmp.path()).status.code(), Some(0));
    let out = swirlmhd(&["norms", "o/B.snap", "--besov", "1,inf,1", "--besov", "-1,inf,1", "--lp-n", "16"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("name = B"));
    assert!(text.contains("L^inf = "));
    let besov = text.lines().find(|l| l.starts_with("B^{1}_{inf,1}")).unwrap();
    let v: f64 = besov.split(" = ").nth(1).unwrap().parse().unwrap();
    assert!(v.is_finite() && v > 0.0);
    assert!(text.contains("B^{-1}_{inf,1} = "));

    let bad = swirlmhd(&["norms", "o/B.snap", "--besov", "1,inf"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_aggregates_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "stepper.t_end = 0.02\n");
    let out = swirlmhd(&["sweep", &cfg, "--param", "p", "--values", "1.01,1.02", "--out", "sw"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("sw/sweep_summary.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("p,1.01,ok"));
    assert!(tmp.path().join("sw/run_001/summary.csv").exists());

    let bad = swirlmhd(&["sweep", &cfg, "--param", "p", "--values", "2.0"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
}
