//! End-to-end tests of the binary: exit-status contract, report writing,
//! scheme save/load round trip, and report determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn pwlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("pwlab-cli-{name}"))
}

#[test]
fn pipeline_q3_passes_and_writes_report() {
    let report = tmp("report-q3.json");
    let out = pwlab(&["pipeline", "--q", "3", "--json", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("summary: pass"));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["format_version"], 1);
    assert_eq!(doc["summary"], "pass");
    assert!(doc["records"].as_array().unwrap().len() > 30);
    std::fs::remove_file(&report).ok();
}

#[test]
fn nonprime_q_is_usage_error() {
    let out = pwlab(&["build-gq", "--q", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not prime"));
}

#[test]
fn missing_mode_is_usage_error() {
    let out = pwlab(&["verify-params"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn save_then_load_roundtrip() {
    let file = tmp("scheme-q3.json");
    let out = pwlab(&["save", "--q", "3", "--file", file.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = pwlab(&["load", "--file", file.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("valencies [1, 20, 30, 20, 1]"));
    assert!(text.contains("summary: pass"));
    std::fs::remove_file(&file).ok();
}

#[test]
fn corrupted_scheme_fails_with_exit_1() {
    let file = tmp("scheme-corrupt.json");
    let out = pwlab(&["save", "--q", "3", "--file", file.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&file).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    // corrupt symmetrically so the failure is a parameter failure, not a
    // file-shape failure
    let n = 72;
    let rels = doc["relations"].as_array_mut().unwrap();
    let old = rels[1].as_u64().unwrap();
    let new = if old == 1 { 2 } else { 1 };
    rels[1] = new.into();
    rels[n] = new.into();
    std::fs::write(&file, serde_json::to_string(&doc).unwrap()).unwrap();

    let report = tmp("report-corrupt.json");
    let out = pwlab(&[
        "pipeline",
        "--file",
        file.to_str().unwrap(),
        "--json",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    // report is still written on failure
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["summary"], "fail");
    assert!(!doc["skipped_stages"].as_array().unwrap().is_empty());
    std::fs::remove_file(&file).ok();
    std::fs::remove_file(&report).ok();
}

#[test]
fn triples_pins_zero_forced_unknowns() {
    let out = pwlab(&[
        "triples", "--triple", "3,3,3", "--krein", "--symmetry", "--q", "3",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("json on stdout");
    assert_eq!(doc["pinned"]["[1 3 3]"], "0/1");
    assert_eq!(doc["pinned"]["[2 3 3]"], "0/1");
    assert_eq!(doc["triple"], serde_json::json!([3, 3, 3]));
}

#[test]
fn reports_are_deterministic() {
    let r1 = tmp("det-1.json");
    let r2 = tmp("det-2.json");
    for r in [&r1, &r2] {
        let out = pwlab(&[
            "verify-params",
            "--q",
            "3",
            "--json",
            r.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let a = std::fs::read(&r1).unwrap();
    let b = std::fs::read(&r2).unwrap();
    assert_eq!(a, b, "reports must be byte-identical without --timings");
    std::fs::remove_file(&r1).ok();
    std::fs::remove_file(&r2).ok();
}

#[test]
fn stage_selection() {
    let out = pwlab(&["pipeline", "--q", "3", "--checks", "params,triples"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("triple-nonneg-pins"));
    assert!(!text.contains("clique-enumeration"));
}

#[test]
fn build_gq_emits_document() {
    let doc_path = tmp("gq-q3.json");
    let out = pwlab(&["build-gq", "--q", "3", "--out", doc_path.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&doc_path).unwrap()).unwrap();
    assert_eq!(doc["format_version"], 1);
    assert_eq!(doc["q"], 3);
    assert_eq!(doc["points"].as_array().unwrap().len(), 112);
    assert_eq!(doc["lines"].as_array().unwrap().len(), 280);
    assert_eq!(doc["sub_points"].as_array().unwrap().len(), 40);
    assert_eq!(doc["sub_lines"].as_array().unwrap().len(), 40);
    std::fs::remove_file(&doc_path).ok();
}

#[test]
fn emitted_cliques_document() {
    let path = tmp("cliques-q3.json");
    let out = pwlab(&[
        "cliques",
        "--q",
        "3",
        "--emit-cliques",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["cliques"].as_array().unwrap().len(), 240);
    assert_eq!(doc["classes"].as_array().unwrap().len(), 40);
    assert_eq!(doc["partitions"].as_array().unwrap().len(), 40);
    std::fs::remove_file(&path).ok();
}
