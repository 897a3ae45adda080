//! End-to-end runs of the `curvflow` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn curvflow(args: &[&str]) -> Output {
    curvflow_threads(args, 1)
}

fn curvflow_threads(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvflow"))
        .args(args)
        .env("CURVFLOW_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn verdicts(dir: &Path) -> Vec<(String, String)> {
    let reports = dir.join("reports");
    let mut out = Vec::new();
    for (p, bytes) in tree(&reports) {
        if p.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            out.push((
                v["quantity"].as_str().unwrap().to_string(),
                v["verdict"].as_str().unwrap().to_string(),
            ));
        }
    }
    out
}

const SMALL_RUN: &str = r#"{"command": "simulate", "n": 2, "speed": {"speed": "harmonic_mean"},
    "shape": {"shape": "ellipsoid", "a": 1.5, "b": 1.0, "c": 1.0}, "resolution": {"segments": 40},
    "flow": {"max_steps": 300, "snapshot_every": 30}}"#;

#[test]
fn sphere_fixture_analyzes_clean() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sphere.json",
        r#"{"command": "analyze", "n": 3, "speed": {"speed": "mean_curvature"}}"#,
    );
    let out = tmp.path().join("hist");
    let o = curvflow(&[
        "sphere-fixture",
        "-c",
        &cfg,
        "-o",
        out.to_str().unwrap(),
        "--snapshots",
        "60",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = curvflow(&["analyze", "-i", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = verdicts(&out);
    assert!(v.iter().any(|(q, _)| q.contains("harnack")), "{v:?}");
    assert!(v.iter().all(|(_, verdict)| verdict != "fail"), "{v:?}");
    assert!(out.join("reports/monitors.csv").exists());
}

#[test]
fn certify_speed_reports_and_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let good = write_config(
        tmp.path(),
        "h.json",
        r#"{"command": "certify-speed", "n": 3, "speed": {"speed": "mean_curvature"}, "seed": 7,
            "certify": {"properties": ["one_homogeneous", "monotone", "concave", "convex"], "samples": 500}}"#,
    );
    let o = curvflow(&["certify-speed", "-c", &good, "-o", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("certify.json")).unwrap()).unwrap();
    assert_eq!(report["reports"].as_array().unwrap().len(), 4);

    // the norm is convex, not concave
    let bad = write_config(
        tmp.path(),
        "norm.json",
        r#"{"command": "certify-speed", "n": 3, "speed": {"speed": "norm"}, "seed": 7,
            "certify": {"properties": ["concave"], "samples": 500}}"#,
    );
    assert_eq!(code(&curvflow(&["certify-speed", "-c", &bad])), 1);
    assert_eq!(
        code(&curvflow(&["--informational-only", "certify-speed", "-c", &bad])),
        0
    );
}

#[test]
fn probe_q_two_harmonic_cylindrical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "q.json",
        r#"{"command": "probe-q", "n": 3, "speed": {"speed": "two_harmonic_mean"}, "seed": 11,
            "probe_q": [{"form": {"config": "cylindrical_g1", "m": 1}, "samples": 2000}]}"#,
    );
    let o = curvflow(&["probe-q", "-c", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["reports"][0]["passed"], serde_json::Value::Bool(true));
}

#[test]
fn invalid_config_exits_two_and_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"command": "simulate", "n": 2, "speed": {"speed": "mean_curvature"}, "flow": {"c_cfl": "fast"}}"#,
    );
    let o = curvflow(&["simulate", "-c", &cfg, "-o", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("c_cfl"));
    let o = curvflow(&["analyze", "-i", tmp.path().join("missing").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_is_deterministic_and_reanalyzes_identically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL_RUN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = curvflow(&[
            "--informational-only",
            "simulate",
            "-c",
            &cfg,
            "-o",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let first = tree(&a);
    assert!(first.len() > 3);
    assert_eq!(first, tree(&b));

    let o = curvflow(&["--informational-only", "analyze", "-i", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(tree(&a), first);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL_RUN);
    let mut trees = Vec::new();
    for threads in [1, 3] {
        let dir = tmp.path().join(format!("t{threads}"));
        let o = curvflow_threads(
            &[
                "--informational-only",
                "simulate",
                "-c",
                &cfg,
                "-o",
                dir.to_str().unwrap(),
            ],
            threads,
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        trees.push(tree(&dir));
    }
    assert_eq!(trees[0], trees[1]);
}
