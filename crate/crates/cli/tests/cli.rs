use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fwlb(out: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fwlb"));
    cmd.args(args).arg("--out").arg(out);
    cmd.output().expect("binary runs")
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn fixed_seed_gives_identical_tables() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["run", "--horizon", "200", "--starts", "2", "--seed", "7"];
    assert!(fwlb(a.path(), &args).status.success());
    assert!(fwlb(b.path(), &args).status.success());
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for name in names {
        let (x, y) = (
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
        );
        assert_eq!(x, y, "{name:?} differs between runs");
    }
    let other = tempfile::tempdir().unwrap();
    assert!(fwlb(
        other.path(),
        &["run", "--horizon", "200", "--starts", "2", "--seed", "8"]
    )
    .status
    .success());
    let f = "rates_boundary_0.csv";
    assert_ne!(
        fs::read(a.path().join(f)).unwrap(),
        fs::read(other.path().join(f)).unwrap()
    );
}

#[test]
fn worstcase_writes_a_passing_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = fwlb(dir.path(), &["worstcase", "--horizon", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cert: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["certificate"]["passes"], Value::Bool(true));
    assert_eq!(cert["certificate"]["horizon"], 100);
    let replay = fs::read_to_string(dir.path().join("replay.csv")).unwrap();
    assert!(replay.starts_with("t,r,s\n"));
    assert_eq!(replay.lines().count(), 102);
}

#[test]
fn hardware_worstcase_fails_its_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = fwlb(dir.path(), &["worstcase", "--horizon", "100", "--precision-bits", "53"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(summary(&out)["passed"], Value::Bool(false));
}

#[test]
fn perturbed_verify_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = fwlb(dir.path(), &["verify", "--suite", "worstcase", "--perturb"]);
    assert_eq!(out.status.code(), Some(1));
    let checks = summary(&out)["details"]["checks"].as_array().unwrap().clone();
    let perturbed = checks.iter().find(|c| c["name"] == "perturbed_monotone_s").unwrap();
    assert_eq!(perturbed["passed"], Value::Bool(false));
}

#[test]
fn suite_filter_limits_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = fwlb(dir.path(), &["verify", "--suite", "numeric", "--suite", "dynamics"]);
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks
        .iter()
        .all(|c| c["suite"] == "numeric" || c["suite"] == "dynamics"));
    assert!(checks.iter().all(|c| c["passed"] == Value::Bool(true)));
}

#[test]
fn empty_phase_trace_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = fwlb(dir.path(), &["phase", "--source", "empty", "--grid-n", "5"]);
    assert!(out.status.success());
    assert_eq!(
        fs::read_to_string(dir.path().join("phase_trace.csv")).unwrap(),
        "t,r,s\n"
    );
    let curves = fs::read_to_string(dir.path().join("phase_curves.csv")).unwrap();
    assert!(curves.starts_with("curve,r,s\n"));
    assert_eq!(curves.lines().count(), 1 + 3 * 5);
}

#[test]
fn phase_reads_a_written_replay() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fwlb(dir.path(), &["worstcase", "--horizon", "50"]).status.success());
    let replay = dir.path().join("replay.csv");
    let out = fwlb(dir.path(), &["phase", "--trace", replay.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(summary(&out)["details"]["points"], 51);
}

#[test]
fn json_format_writes_row_objects() {
    let dir = tempfile::tempdir().unwrap();
    let out = fwlb(dir.path(), &["heatmap", "--grid-n", "5", "--format", "json"]);
    assert!(out.status.success());
    let rows: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("heatmap.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["x"].is_string() && r["iters"].is_string()));
}

#[test]
fn bad_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        fwlb(dir.path(), &["worstcase", "--horizon", "10", "--rmax", "1/2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fwlb(dir.path(), &["worstcase", "--horizon", "10", "--epsilon", "1/0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fwlb(dir.path(), &["phase", "--source", "stable"]).status.code(),
        Some(2)
    );
}
