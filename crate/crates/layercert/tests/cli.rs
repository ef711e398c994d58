use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use layercert::format::{load_network, read_records, BenchRecord};

const APPENDIX: &str = r#"{"input_dim": 2, "layers": [
    {"weights": [[1, 0], [0, 1]], "bias": [0, 0]},
    {"weights": [[1, 1]], "bias": [-1]},
    {"weights": [[1], [0]], "bias": [0, 10]}]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_layercert"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let net = dir.join("appA.json");
    let pts = dir.join("x.csv");
    std::fs::write(&net, APPENDIX).unwrap();
    std::fs::write(&pts, "-1,-1.25\n").unwrap();
    (net, pts)
}

fn records(out: &Output) -> Vec<BenchRecord> {
    read_records(out.stdout.as_slice()).unwrap()
}

#[test]
fn verify_certifies_small_linf_ball() {
    let dir = tempfile::tempdir().unwrap();
    let (net, pts) = fixture(dir.path());
    let out = run(&["verify", "--net", s(&net), "--points", s(&pts), "--method", "layercert-both", "--norm", "inf"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = records(&out);
    assert_eq!(r.len(), 1);
    assert_eq!((r[0].status.as_str(), r[0].value), ("certified", 0.3));
}

#[test]
fn verify_exact_distance_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let (net, pts) = fixture(dir.path());
    let out = run(&[
        "verify",
        "--net",
        s(&net),
        "--points",
        s(&pts),
        "--method",
        "geocert",
        "--norm",
        "2",
        "--radius",
        "20",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let r = records(&out);
    assert_eq!(r[0].status, "exact");
    assert!((r[0].value - 9.3692).abs() < 1e-4);

    let oracle = run(&["oracle", "--net", s(&net), "--points", s(&pts), "--norm", "2"]);
    let report: serde_json::Value = serde_json::from_slice(&oracle.stdout).unwrap();
    assert_eq!(report["regions"], 7);
    let d = report["inputs"][0]["distance"].as_f64().unwrap();
    assert!((d - r[0].value).abs() < 1e-6);
}

#[test]
fn verify_missing_network_fails_without_records() {
    let dir = tempfile::tempdir().unwrap();
    let (_, pts) = fixture(dir.path());
    let out_file = dir.path().join("out.csv");
    let out = run(&["verify", "--net", "/nonexistent/net.json", "--points", s(&pts), "--out", s(&out_file)]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    assert!(!out_file.exists());
}

#[test]
fn verify_rejects_restriction_for_geocert() {
    let dir = tempfile::tempdir().unwrap();
    let (net, pts) = fixture(dir.path());
    let out =
        run(&["verify", "--net", s(&net), "--points", s(&pts), "--method", "geocert", "--restriction", "initial"]);
    assert!(!out.status.success());
}

#[test]
fn label_mismatch_warns() {
    let dir = tempfile::tempdir().unwrap();
    let (net, pts) = fixture(dir.path());
    std::fs::write(&pts, "-1,-1.25,0\n").unwrap();
    let out = run(&["verify", "--net", s(&net), "--points", s(&pts)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(records(&out).len(), 1);
}

#[test]
fn timeout_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (net, pts) = fixture(dir.path());
    let out = run(&[
        "verify",
        "--net",
        s(&net),
        "--points",
        s(&pts),
        "--method",
        "layercert-basic",
        "--norm",
        "2",
        "--radius",
        "20",
        "--time-limit",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(records(&out)[0].status, "timeout");
}

#[test]
fn gen_net_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out =
            run(&["gen-net", "--arch", "2x[10]", "--input-dim", "4", "--classes", "2", "--seed", "7", "--out", s(p)]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let net = load_network(&a).unwrap();
    assert_eq!((net.input_dim(), net.hidden_widths(), net.num_classes()), (4, vec![10, 10], 2));
    assert!(!run(&["gen-net", "--arch", "0x[5]", "--input-dim", "4"]).status.success());
}

#[test]
fn oracle_cap_and_empty_points() {
    let dir = tempfile::tempdir().unwrap();
    let (net, _) = fixture(dir.path());
    let out = run(&["oracle", "--net", s(&net)]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["regions"], 7);
    assert_eq!(report["inputs"].as_array().unwrap().len(), 0);

    let big = dir.path().join("big.json");
    assert!(run(&["gen-net", "--arch", "[11,10]", "--input-dim", "3", "--out", s(&big)]).status.success());
    let out = run(&["oracle", "--net", s(&big)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("21"));
}

#[test]
fn end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    let pts = dir.path().join("pts.csv");
    assert!(run(&[
        "gen-net",
        "--arch",
        "2x[6]",
        "--input-dim",
        "3",
        "--classes",
        "3",
        "--seed",
        "11",
        "--out",
        s(&net)
    ])
    .status
    .success());
    assert!(run(&["gen-points", "--net", s(&net), "--count", "6", "--seed", "5", "--out", s(&pts)]).status.success());
    let go = |jobs: &str| {
        let out = run(&[
            "verify",
            "--net",
            s(&net),
            "--points",
            s(&pts),
            "--norm",
            "2",
            "--radius",
            "5",
            "--method",
            "layercert-both",
            "--jobs",
            jobs,
        ]);
        assert!(out.status.success());
        records(&out).into_iter().map(|r| BenchRecord { wall_time: 0.0, ..r }).collect::<Vec<_>>()
    };
    let a = go("1");
    assert_eq!(a.len(), 6);
    assert!(a.iter().enumerate().all(|(i, r)| r.input_id == i));
    assert_eq!(a, go("1"));
    assert_eq!(a, go("3"));
}

#[test]
fn profile_from_two_methods() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    let pts = dir.path().join("pts.csv");
    run(&["gen-net", "--arch", "2x[5]", "--input-dim", "2", "--seed", "3", "--out", s(&net)]);
    run(&["gen-points", "--net", s(&net), "--count", "5", "--seed", "1", "--out", s(&pts)]);
    let mut files = Vec::new();
    for m in ["geocert", "layercert-basic"] {
        let f = dir.path().join(format!("{m}.csv"));
        let out = run(&["verify", "--net", s(&net), "--points", s(&pts), "--norm", "2", "--method", m, "--out", s(&f)]);
        assert!(out.status.success());
        files.push(f);
    }
    let out = run(&["profile", s(&files[0]), s(&files[1])]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,time,solved"));
    assert_eq!(lines.count(), 10);

    let out = run(&["profile", s(&files[0])]);
    assert!(!out.status.success());
}

#[test]
fn idx_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("img.idx");
    let labels = dir.path().join("lab.idx");
    let mut raw = vec![0u8, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2];
    raw.extend_from_slice(&[0, 255, 51, 0]);
    std::fs::write(&images, raw).unwrap();
    std::fs::write(&labels, [0u8, 0, 8, 1, 0, 0, 0, 2, 7, 1]).unwrap();
    let out = run(&["idx2csv", "--images", s(&images), "--labels", s(&labels)]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "0,1,7\n0.2,0,1\n");
}
