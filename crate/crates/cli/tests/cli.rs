use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toeplitz-lab"))
}

fn scratch(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], config: Option<&Path>, out: Option<&Path>) -> Output {
    let mut c = exe();
    c.args(args);
    if let Some(p) = config {
        c.arg("--config").arg(p);
    }
    if let Some(o) = out {
        c.arg("--out").arg(o);
    }
    c.output().expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn two_levels_is_a_config_error() {
    let d = scratch("two-levels");
    let cfg = write_config(&d, r#"{"sphere": {"ks": [16, 32]}}"#);
    let out = d.join("out");
    let o = run(&["verify-axioms"], Some(&cfg), Some(&out));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sphere.ks"));
    assert_eq!(read_json(&out.join("failures.json"))["kind"], "config");
}

#[test]
fn bad_symbol_points_at_the_column() {
    let d = scratch("grammar");
    let cfg = write_config(&d, r#"{"joint_noise": {"f": "x1 +* x2"}}"#);
    let o = run(&["describe"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("column 5"), "{err}");
    assert!(err.lines().any(|l| l.trim() == "^"), "{err}");
}

#[test]
fn radii_below_the_quantum_scale_are_rejected() {
    let d = scratch("localization");
    let cfg = write_config(&d, "{}");
    let out = d.join("out");
    let o = run(&["localization", "--print", "quiet"], Some(&cfg), Some(&out));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("quantum scale"));
    assert!(!out.join("report.json").exists());
}

#[test]
fn unknown_keys_and_missing_config_are_usage_errors() {
    let d = scratch("usage");
    let cfg = write_config(&d, r#"{"sphere": {"kz": [16, 32, 64]}}"#);
    assert_eq!(run(&["describe"], Some(&cfg), None).status.code(), Some(2));
    assert_eq!(run(&["describe"], None, None).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], Some(&cfg), None).status.code(), Some(2));
    let o = run(&["describe", "--set", "sphere.ks"], None, None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn polynomial_exact_passes_at_round_off() {
    let d = scratch("exact");
    let out = d.join("out");
    let o = run(&["bargmann", "--preset", "polynomial-exact", "--print", "all"], None, Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["schema"], "toeplitz-lab/report/v1");
    assert_eq!(report["passed"], true);
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        let detail = c["detail"].as_str().unwrap();
        if let Some(rest) = detail.strip_prefix("max deviation ") {
            let dev: f64 = rest.split_whitespace().next().unwrap().parse().unwrap();
            assert!(dev <= 1e-12, "{detail}");
        }
    }
    let csv = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,hbar,quantity,bound,ratio"));
    assert!(!out.join("failures.json").exists());
    assert!(out.join("run-meta.json").exists());
}

#[test]
fn describe_writes_nothing() {
    let d = scratch("describe");
    let cfg = write_config(&d, "{}");
    let out = d.join("out");
    let o = run(&["describe"], Some(&cfg), Some(&out));
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("dim"), "{text}");
    assert!(!out.exists());
}

#[test]
fn seed_and_set_override_reach_the_report() {
    let d = scratch("seed");
    let out = d.join("out");
    let o = run(
        &["bargmann", "--preset", "polynomial-exact", "--seed", "17", "--set", "bargmann.exact.pairs=3", "--print", "quiet"],
        None,
        Some(&out),
    );
    assert_eq!(o.status.code(), Some(0));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["config"]["bargmann"]["exact"]["pairs"], 3);
    assert_eq!(report["config"]["seed"], 17);
}
