use std::path::Path;
use std::process::Command;

use ddsolve::bench::{run_to_dir, ExperimentConfig};

const CONFIG: &str = r#"{
  "name": "small",
  "problem": { "kind": "forchheimer", "cells": 99 },
  "decomposition": { "subdomains": [4], "overlap_layers": 2 },
  "methods": ["nras", "nsras", "raspen", "sraspen"],
  "tolerances": { "stationary_maxit": 15 }
}"#;

/// CSV contents with the wall-clock column dropped.
fn stable_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let headers = rd.headers().unwrap().clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| &headers[i] != "wall_ms").collect();
    let mut rows = vec![keep.iter().map(|&i| headers[i].to_string()).collect()];
    for rec in rd.records() {
        let rec = rec.unwrap();
        rows.push(keep.iter().map(|&i| rec[i].to_string()).collect());
    }
    rows
}

#[test]
fn single_thread_runs_are_reproducible() {
    let cfg = ExperimentConfig::from_json(CONFIG).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = run_to_dir(&cfg, a.path(), Some(1), 7).unwrap();
    let sb = run_to_dir(&cfg, b.path(), Some(1), 7).unwrap();
    assert_eq!(sa.runs.len(), 4);
    for (ra, rb) in sa.runs.iter().zip(&sb.runs) {
        assert_eq!((ra.iters, ra.cost, ra.converged), (rb.iters, rb.cost, rb.converged));
    }
    for m in ["nras", "nsras", "raspen", "sraspen"] {
        let file = format!("{m}.csv");
        assert_eq!(stable_csv(&a.path().join(&file)), stable_csv(&b.path().join(&file)), "{file}");
    }
    let newton = stable_csv(&a.path().join("raspen.csv"));
    assert_eq!(newton[0], ["iter", "err", "res", "I(k)", "L_in^k", "L(n)"]);
    let linear = stable_csv(&a.path().join("nras.csv"));
    assert_eq!(linear[0], ["iter", "err", "res", "cum_solves", "cum_parallel_rounds", "basis_bytes"]);
    assert!(a.path().join("summary.json").exists() && a.path().join("decomposition.json").exists());
}

#[test]
fn binary_run_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_ddsolve"))
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2", "--seed", "3"])
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let runs = summary["runs"].as_array().unwrap();
    assert!(runs.iter().all(|r| r.get("L_n").is_some() && r.get("bytes").is_some() && r.get("converged").is_some()));

    let verify = Command::new(env!("CARGO_BIN_EXE_ddsolve")).arg("verify").output().unwrap();
    assert!(verify.status.success(), "{}", String::from_utf8_lossy(&verify.stdout));

    let bad = Command::new(env!("CARGO_BIN_EXE_ddsolve")).args(["run", "/nonexistent.json", "--out", "x"]).status().unwrap();
    assert!(!bad.success());
}
