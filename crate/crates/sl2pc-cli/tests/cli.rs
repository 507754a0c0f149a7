use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn sl2pc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sl2pc")).args(args).output().expect("binary runs")
}

fn golden(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(p).expect("golden file exists")
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).expect("valid JSON line")).collect()
}

fn tmp(name: &str, contents: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("sl2pc-{}-{name}", std::process::id()));
    std::fs::write(&p, contents).unwrap();
    p
}

#[test]
fn verify_core_matches_golden() {
    let out = sl2pc(&["verify", "core", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), golden("verify_core.jsonl"));
}

#[test]
fn verify_is_deterministic() {
    let a = sl2pc(&["verify", "skeleton", "--json", "--seed", "7"]);
    let b = sl2pc(&["verify", "skeleton", "--json", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = sl2pc(&["verify", "skeleton", "--json", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn report_file_equals_stdout() {
    let p = std::env::temp_dir().join(format!("sl2pc-{}-report.jsonl", std::process::id()));
    let out = sl2pc(&["verify", "core", "--json", "--report", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&p).unwrap(), out.stdout);
    std::fs::remove_file(p).ok();
}

#[test]
fn summary_line_counts() {
    let lines = json_lines(&sl2pc(&["verify", "core", "--json"]));
    let s = lines.last().unwrap();
    assert_eq!(s["summary"], true);
    assert_eq!(s["checks"].as_u64().unwrap() as usize, lines.len() - 1);
    assert_eq!(s["failed"], 0);
}

#[test]
fn timings_only_on_request() {
    let plain = json_lines(&sl2pc(&["verify", "core", "--json"]));
    assert!(plain.iter().all(|r| r.get("runtime_ms").is_none()));
    let timed = json_lines(&sl2pc(&["verify", "core", "--json", "--timings"]));
    assert!(timed.iter().filter(|r| r.get("summary").is_none()).all(|r| r["runtime_ms"].is_number()));
}

#[test]
fn cohomology_matches_golden() {
    let out = sl2pc(&["cohomology", "--json", "--max-degree", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), golden("cohomology_d4.jsonl"));
}

#[test]
fn cohomology_text_table() {
    let out = sl2pc(&["cohomology", "--max-degree", "2", "--k", "0,3"]);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8_lossy(&out.stdout);
    assert!(s.contains("tables agree"));
    assert_eq!(s.lines().count(), 5);
}

#[test]
fn tol_scale_propagates() {
    let lines = json_lines(&sl2pc(&["verify", "flow", "--json", "--tol-scale", "1e-3"]));
    let rk4 = lines.iter().find(|r| r["id"] == "closed_vs_rk4").unwrap();
    let tol = rk4["tolerance"].as_f64().unwrap();
    assert!((tol - 1e-11).abs() < 1e-24, "{tol}");
    let rel = lines.iter().find(|r| r["id"] == "r2_t_closed_form").unwrap();
    assert!((rel["tolerance"].as_f64().unwrap() - 1e-13).abs() < 1e-26);
}

#[test]
fn config_file_overrides() {
    let p = tmp("ok.toml", "seed = 9\n[flow]\nsamples = 10\n");
    let lines = json_lines(&sl2pc(&["--config", p.to_str().unwrap(), "verify", "core", "--json"]));
    assert!(lines.iter().all(|r| r["seed"] == 9));
    let hash = lines[0]["config_hash"].clone();
    let d = json_lines(&sl2pc(&["verify", "core", "--json", "--seed", "9"]));
    assert_ne!(hash, d[0]["config_hash"]);
    std::fs::remove_file(p).ok();
}

#[test]
fn bad_config_exits_2() {
    for body in ["seed = \"x\"", "[flow\nsamples = 3", "unknown_key = 1", "[flow]\nsamples = 0\n"] {
        let p = tmp("bad.toml", body);
        let out = sl2pc(&["--config", p.to_str().unwrap(), "verify", "core"]);
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
        std::fs::remove_file(p).ok();
    }
    let out = sl2pc(&["--config", "/nonexistent/sl2pc.toml", "verify", "core"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_suite_exits_2() {
    assert_eq!(sl2pc(&["verify", "nope"]).status.code(), Some(2));
    assert_eq!(sl2pc(&["--tol-scale", "-1", "verify", "core"]).status.code(), Some(2));
}

#[test]
fn flow_presets() {
    let rows = json_lines(&sl2pc(&["flow", "nilpotent", "--t", "0,1", "--json"]));
    assert_eq!(rows.len(), 2);
    assert!((rows[0]["r2_t"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    assert!((rows[1]["r2_t"].as_f64().unwrap() - 0.5).abs() < 1e-14);
    // diag(1, -1) is normal: the flow is stationary
    let rows = json_lines(&sl2pc(&["flow", "diag", "--json"]));
    let a0 = rows[0]["a_t"].clone();
    assert!(rows.iter().all(|r| r["a_t"] == a0 && r["gap"].as_f64().unwrap().abs() < 1e-14));
}

#[test]
fn flow_random_is_reproducible() {
    let a = sl2pc(&["flow", "random:42", "--json"]);
    let b = sl2pc(&["flow", "random:42", "--json"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, sl2pc(&["flow", "random:43", "--json"]).stdout);
}

#[test]
fn flow_rejects_bad_points() {
    for p in ["1,2,3", "a,b,c,d,e,f", "random:x", "1,0,0,0,0,inf"] {
        assert_eq!(sl2pc(&["flow", p]).status.code(), Some(2), "{p}");
    }
    assert_eq!(sl2pc(&["flow", "diag", "--t", "-1"]).status.code(), Some(2));
}
