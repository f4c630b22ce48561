//! Runs the compiled binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use convex_sampler::formats::{read_jsonl, RunSummary};
use convex_sampler_core::{bodies::Ball, ConvexBody};
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convex-sampler"))
        .args(args)
        .env("CONVEX_SAMPLER_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const BALL2: &str = r#"{"type": "ball", "d": 2, "radius": 2.0}"#;
const BALL10: &str = r#"{"type": "ball", "d": 10, "radius": 1.0}"#;
const BOX2: &str = r#"{"type": "box", "d": 2, "bounds": [[-1, 1], [-1, 1]]}"#;

#[test]
fn sample_mode_writes_k_records_and_summary() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "ball2d.json", BALL2);
    let out = dir.path().join("s.jsonl");
    let o = bin(&[
        "--body",
        &body,
        "--iters",
        "10",
        "--chains",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let recs = read_jsonl(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(recs.len(), 10);
    let ball = Ball::new(2, 2.0).unwrap();
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r.iter, i + 1);
        assert_eq!(r.chain, 0);
        assert_eq!(r.proj_calls, 1);
        assert!(ball.contains(&r.x).unwrap());
    }
    let summary: RunSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s.jsonl.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary.totals.iterations, 10);
    assert_eq!(
        summary.totals.rejections,
        recs.iter().map(|r| r.rejections).sum::<u64>()
    );
    assert_eq!(summary.warmness, Some(1.0));
}

#[test]
fn record_count_is_chains_times_k_and_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "box.json", BOX2);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = bin(&[
            "--body",
            &body,
            "--rgo",
            "separation",
            "--iters",
            "15",
            "--chains",
            "3",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out).unwrap()
    };
    let a = run("a.jsonl");
    let b = run("b.jsonl");
    assert_eq!(a, b);
    let recs = read_jsonl(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(recs.len(), 45);
    assert!(recs.iter().all(|r| r.sep_calls > 0 && r.proj_calls == 0));
}

#[test]
fn stdout_carries_only_samples() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "ball2d.json", BALL2);
    let o = Command::new(env!("CARGO_BIN_EXE_convex-sampler"))
        .args(["--body", &body, "--iters", "5", "--chains", "2"])
        .env("CONVEX_SAMPLER_LOG", "debug")
        .output()
        .unwrap();
    assert!(o.status.success());
    let recs = read_jsonl(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(recs.len(), 10);
    assert!(!o.stderr.is_empty(), "debug logs go to stderr");
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "ball2d.json", BALL2);
    assert_eq!(
        bin(&["--body", &body, "--eta", "-1"]).status.code(),
        Some(2)
    );
    assert_eq!(bin(&["--body", &body, "--bogus"]).status.code(), Some(2));
    assert_eq!(
        bin(&["--body", &body, "--iters", "ten"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bin(&["--body", "/nonexistent/body.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bin(&["--body", &body, "--chains", "0"]).status.code(),
        Some(2)
    );
    let bad = write(dir.path(), "bad.json", "{\"type\": \"ball\"");
    assert_eq!(bin(&["--body", &bad]).status.code(), Some(2));
}

#[test]
fn a1_violation_exits_3() {
    let dir = TempDir::new().unwrap();
    let body = write(
        dir.path(),
        "small.json",
        r#"{"type": "ball", "d": 3, "radius": 0.5}"#,
    );
    let o = bin(&["--body", &body, "--iters", "3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn rejection_budget_exits_4() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "ball10.json", BALL10);
    let o = bin(&[
        "--body",
        &body,
        "--rgo",
        "separation",
        "--iters",
        "50",
        "--rejection-cap",
        "1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn inandout_halt_failure_exits_1_and_restart_recovers() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "ball10.json", BALL10);
    let halt = bin(&[
        "--body",
        &body,
        "--rgo",
        "inandout",
        "--iters",
        "200",
        "--inandout-cap",
        "1",
    ]);
    assert_eq!(halt.status.code(), Some(1));
    let restart = bin(&[
        "--body",
        &body,
        "--rgo",
        "inandout",
        "--iters",
        "200",
        "--inandout-cap",
        "1",
        "--inandout-policy",
        "restart",
    ]);
    assert!(
        restart.status.success(),
        "{}",
        String::from_utf8_lossy(&restart.stderr)
    );
}

#[test]
fn audit_mode_projection_ball10() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "ball10.json", BALL10);
    let report = dir.path().join("audit.json");
    let o = bin(&[
        "--body",
        &body,
        "--rgo",
        "projection",
        "--warm",
        "exact",
        "--iters",
        "2000",
        "--mode",
        "audit",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    let audit = &v["audits"][0];
    assert_eq!(audit["pass"], true);
    assert!((audit["bound_value"].as_f64().unwrap() - 5.1328).abs() < 1e-4);
    assert!(audit["observed_value"].as_f64().unwrap() <= 5.1328);
}

#[test]
fn audit_with_unknown_warmness_is_skipped() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "ball10.json", BALL10);
    let o = bin(&[
        "--body", &body, "--warm", "unitball", "--iters", "50", "--mode", "audit",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["audits"][0]["skipped"], "warmness unknown");
    assert_eq!(v["audits"][0]["pass"], false);
}

#[test]
fn diagnose_mode_reports_tests_and_trend() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "box.json", BOX2);
    let o = bin(&[
        "--body", &body, "--warm", "point", "--point", "1,1", "--iters", "40", "--chains", "500",
        "--mode", "diagnose",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = v["tests"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["test_name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["ks_coord0", "ks_coord1", "grid_chi2_uniformity"]);
    let trend = v["trend"].as_array().unwrap();
    assert_eq!(trend.len(), 41);
    assert!((trend[0]["chi2"].as_f64().unwrap() - 99.0).abs() < 1e-9);
    assert!(trend[40]["chi2"].as_f64().unwrap() < 1.0);
}

#[test]
fn baseline_compare_writes_csv() {
    let dir = TempDir::new().unwrap();
    let body = write(dir.path(), "box.json", BOX2);
    let out = dir.path().join("cmp.csv");
    let o = bin(&[
        "--body",
        &body,
        "--iters",
        "300",
        "--chains",
        "2",
        "--mode",
        "baseline-compare",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "walk,steps,oracle_calls,moment_error");
    assert_eq!(lines.len(), 4);
    for (line, name) in lines[1..]
        .iter()
        .zip(["asf-projection", "ball-walk", "hit-and-run"])
    {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], name);
        assert_eq!(f[1], "600");
        assert!(f[3].parse::<f64>().unwrap() < 0.5);
    }
}
