use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ffsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ffsum"))
        .args(args)
        .env_remove("FFSUM_BUDGET")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn moebius_kloosterman_sum_record() {
    let out = ffsum(&["sum", "--kind", "moebius-kloosterman", "--field", "3^1", "--F", "T", "--a", "0", "--n", "2"]);
    assert!(out.status.success());
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    // Units contribute +2 and the four linear x coprime to T contribute −4.
    assert_eq!(rec["histogram"], serde_json::json!([-2, 0, 0]));
    assert_eq!(rec["abs"], 2.0);
    assert_eq!(rec["trivial_bound"], 9.0);
}

#[test]
fn bilinear_and_kloosterman_records() {
    let out = ffsum(&["sum", "--kind", "bilinear", "--F", "T", "--a", "1", "--m", "1", "--n", "1"]);
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(rec["re"], -2.0);
    let out = ffsum(&["sum", "--kind", "kloosterman", "--F", "T^2+1", "--a", "1", "--b", "1"]);
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(rec["abs"].as_f64().unwrap() <= 2.0 * 3.0 + 1e-9);
}

#[test]
fn ratio_scan_row_count() {
    let out = ffsum(&["ratio-scan", "--theorem", "2.3", "--field", "3^1", "--r", "2", "--n-range", "1..4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let headers = rdr.headers().unwrap().clone();
    let delta = headers.iter().position(|h| h == "observed_delta").unwrap();
    assert!(rows.iter().all(|r| !r[delta].is_empty()));
}

#[test]
fn every_ratio_claim_runs() {
    for args in [
        vec!["--theorem", "2.1", "--r", "1", "--n-range", "1..2", "--seed", "5"],
        vec!["--theorem", "2.2", "--F", "T^2+T+2", "--n-range", "2..3"],
        vec!["--theorem", "2.4", "--r", "2", "--n-range", "1..3"],
        vec!["--theorem", "2.6", "--R", "3", "--n-range", "2..3"],
    ] {
        let mut full = vec!["ratio-scan"];
        full.extend(args.iter().copied());
        let out = ffsum(&full);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).lines().count() >= 2);
    }
}

#[test]
fn selftest_passes() {
    let out = ffsum(&["selftest"]);
    assert!(out.status.success());
    assert!(!stdout(&out).contains("FAIL"));
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn outputs_and_manifest_are_reproducible() {
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&one, "1"), (&four, "4")] {
        let out = ffsum(&[
            "ratio-scan", "--theorem", "2.2", "--r", "2", "--n-range", "1..4", "--workers", workers, "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(read(one.path(), "ratio.csv"), read(four.path(), "ratio.csv"));
    assert_eq!(read(one.path(), "ratio.jsonl"), read(four.path(), "ratio.jsonl"));
    let manifest: Value = serde_json::from_str(&read(four.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "ratio-scan");
    assert_eq!(manifest["workers"], 4);
    assert_eq!(manifest["config"]["theorem"], "2.2");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_fills_missing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"field": "3^1", "F": "T", "n": 3}"#).unwrap();
    let out = ffsum(&["ap-dist", "--config", cfg.to_str().unwrap(), "--n", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains(",4,9/2,-1/2,"));
}

#[test]
fn weights_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    fs::write(&w, r#"[{"poly": "1", "re": "1"}, {"poly": "2", "re": "-1"}]"#).unwrap();
    let out = ffsum(&[
        "sum", "--kind", "bilinear", "--F", "T+1", "--m", "1", "--n", "1", "--weights", w.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(rec["params"]["weights"], "file");
}

#[test]
fn exit_codes() {
    assert_eq!(ffsum(&["field-info", "--field", "4^1"]).status.code(), Some(2));
    assert_eq!(ffsum(&["ap-dist", "--F", "T"]).status.code(), Some(2));
    assert_eq!(ffsum(&["ratio-scan", "--theorem", "9.9", "--n", "1"]).status.code(), Some(2));
    assert_eq!(
        ffsum(&["ap-dist", "--F", "T", "--n", "3", "--budget-states", "10"]).status.code(),
        Some(3)
    );
    let vaughan = ffsum(&["vaughan", "--F", "T", "--n", "4", "--U", "2"]);
    assert_eq!(vaughan.status.code(), Some(2));
}

#[test]
fn tables_for_remaining_commands() {
    let out = ffsum(&["main-term", "--F", "T", "--d", "1"]);
    assert!(stdout(&out).contains(",5/6,5/3,"));
    let out = ffsum(&["bv", "--R", "2", "--n", "2"]);
    assert!(stdout(&out).contains(",3/2,"));
    let out = ffsum(&["energy", "--F", "T", "--k", "2", "--n", "1"]);
    let text = stdout(&out);
    assert!(text.starts_with("field,q,r,F,k,n,E,method,seconds"));
    assert!(text.contains(",T,2,1,6,convolution,"));
    let out = ffsum(&["vaughan", "--F", "T^2+1", "--a", "1", "--n", "5"]);
    assert_eq!(stdout(&out).lines().count(), 3);
    let out = ffsum(&["field-info", "--field", "3^2"]);
    let info: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(info["q"], 9);
}
