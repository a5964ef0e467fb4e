//! End-to-end runs of the binary on the shipped configurations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn nlvc(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlvc")).args(args).arg("--config").arg(cfg).arg("--out").arg(out).output().expect("run nlvc")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn elasticity_run_writes_fields_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlvc(&["solve-elasticity"], &config("solve-elasticity.json"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["u.f64", "u.json", "f.f64", "f.json", "report.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "solve-elasticity");
    assert!(json(&dir.path().join("report.json"))["recovery_error"].as_f64().unwrap() <= 1e-9);
    let u = nlvc::io::read_field(&dir.path().join("u")).unwrap();
    assert_eq!(u.rank, nlvc::Rank::Vector(2));
}

#[test]
fn cd_run_recovers_manufactured_solution() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlvc(&["solve-cd"], &config("solve-cd.json"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["solve"]["velocity"]["clause"], "bounded");
}

#[test]
fn negative_tolerance_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlvc(&["poincare", "--tol", "-1e-3"], &config("poincare.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tolerance must be positive"));
}

#[test]
fn out_of_range_tail_exponent_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"kernel": {"family": "fractional_tail", "d": 1, "alpha": 1.5}, "domain": {"torus": {"n": [64], "h": 0.03125}}}"#,
    )
    .unwrap();
    let o = nlvc(&["symbol"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_section_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlvc(&["solve-cd"], &config("verify-2d.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}
