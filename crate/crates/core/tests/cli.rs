use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tad_core::scenario::bundled;

fn tad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tad"))
        .args(args)
        .env_remove("TAD_ENUM_BUDGET")
        .output()
        .expect("spawn tad")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(&bundled(name).unwrap().to_json().unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_completed_exits_zero() {
    let o = tad(&["run", "lean_toy"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["trace"], serde_json::json!(["fact", "fact", "fact"]));
    assert_eq!(v["golden"]["matched"], true);
}

#[test]
fn run_is_byte_stable() {
    let a = tad(&["run", "guarded_cohort"]);
    let b = tad(&["run", "guarded_cohort", "--sequential"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn run_writes_report_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = tad(&["run", "guarded_cohort", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["verdict_log"], "r.verdicts.jsonl");
    assert!(dir.path().join("r.verdicts.jsonl").exists());
}

#[test]
fn run_table_format() {
    let o = tad(&["run", "worked_example", "--format", "table"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("{a, b, c}"), "{text}");
    assert!(text.contains("DIFFERS"), "{text}");
}

#[test]
fn io_failure_exits_one() {
    let o = tad(&["run", "lean_toy", "--out", "/nonexistent/dir/r.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("i/o error"));
    let o = tad(&["run", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn parse_and_validation_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"name\": \"x\",\n  \"vocabulary\": [\"a\"\n}").unwrap();
    let o = tad(&["run", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let path = write_scenario(dir.path(), "worked_example", |v| v["decode"]["initial"] = serde_json::json!(["zebra"]));
    let o = tad(&["run", "--scenario", &path]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("zebra") && stderr(&o).contains("decode.initial"), "{}", stderr(&o));

    assert_eq!(code(&tad(&["run", "no_such_scenario"])), 2);
    assert_eq!(code(&tad(&["run"])), 2);
    assert_eq!(code(&tad(&["stats", "--total", "0", "--answered", "0", "--correct", "0"])), 2);
    assert_eq!(code(&tad(&["stats", "--total", "10"])), 2);
    assert_eq!(code(&tad(&["stats", "--total", "10", "--answered", "5", "--correct", "5", "--omega", "2"])), 2);
    assert_eq!(code(&tad(&["perf"])), 2);
    assert_eq!(code(&tad(&["perf", "--cpi0", "3"])), 2);
    assert_eq!(code(&tad(&["perf", "--amdahl", "0.35"])), 2);
    assert_eq!(code(&tad(&["perf", "--amdahl", "1.5,2"])), 2);
    assert_eq!(code(&tad(&["perf", "lean_toy"])), 2);
    assert_eq!(code(&tad(&["bogus"])), 2);
}

#[test]
fn abstained_exits_three() {
    let o = tad(&["run", "abstain_no_improvement"]);
    assert_eq!(code(&o), 3);
    assert_eq!(stdout_json(&o)["retrieval_events"].as_array().unwrap().len(), 2);
}

#[test]
fn empty_safe_set_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "lean_toy", |v| {
        v["kb"]["default"] = "deny".into();
        v.as_object_mut().unwrap().remove("expected");
    });
    let o = tad(&["run", "--scenario", &path]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["status"], "empty_safe_set");
}

#[test]
fn budget_exhausted_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "proof_toy", |v| {
        v["decode"]["horizon"] = 1.into();
        v.as_object_mut().unwrap().remove("expected");
    });
    let o = tad(&["run", "--scenario", &path]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
}

#[test]
fn verify_outcomes() {
    let o = tad(&["verify", "lean_toy"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(stdout_json(&o)["passed"], true);

    let o = tad(&["verify", "incomplete_oracle"]);
    assert_eq!(code(&o), 6);
    let v = stdout_json(&o);
    assert_eq!(v["counterexamples"][0]["prefix"], serde_json::json!(["fact"]));
    assert_eq!(v["counterexamples"][0]["token"], "support");
    assert_eq!(v["blind_spot"]["unreachable"], true);

    let o = tad(&["verify", "lean_toy", "--seed", "7", "--trials", "20", "--format", "table"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("randomized_theorems"));
}

#[test]
fn enumeration_budget_exits_seven() {
    let o = tad(&["verify", "lean_toy", "--max-len", "13"]);
    assert_eq!(code(&o), 7);
    let o = Command::new(env!("CARGO_BIN_EXE_tad"))
        .args(["verify", "lean_toy"])
        .env("TAD_ENUM_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(code(&o), 7, "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_tad"))
        .args(["verify", "lean_toy"])
        .env("TAD_ENUM_BUDGET", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn golden_mismatch_exits_eight() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "lean_toy", |v| v["expected"]["trace"] = serde_json::json!(["support"]));
    let o = tad(&["run", "--scenario", &path]);
    assert_eq!(code(&o), 8);
    assert!(stderr(&o).contains("golden mismatch"));
}

#[test]
fn stats_reproduces_reference_rows() {
    let o = tad(&["stats", "--total", "1000", "--answered", "1000", "--correct", "890", "--baseline-total", "1000", "--baseline-answered", "1000", "--baseline-correct", "720"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["accuracy"], 0.89);
    assert!((v["relative_gain"].as_f64().unwrap() - 0.236).abs() < 1e-3);
    assert!((v["error_reduction"].as_f64().unwrap() - 0.607).abs() < 1e-3);

    let o = tad(&["stats", "--total", "1000", "--answered", "920", "--correct", "864", "--omega", "0.5"]);
    let v = stdout_json(&o);
    assert_eq!(v["coverage"], 0.92);
    assert_eq!(v["utility"], 0.904);

    let o = tad(&["stats", "--table"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["72%", "28%", "89%", "86.4%", "13.6%", "92%", "0.904"] {
        assert!(text.contains(needle), "{needle} in {text}");
    }
    let o = tad(&["stats", "--table", "--row", "base=10,10,5", "--row", "new=10,8,7,2"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("70%"));
    assert_eq!(code(&tad(&["stats", "--table", "--row", "oops"])), 2);
}

#[test]
fn perf_from_flags_and_scenario() {
    let o = tad(&[
        "perf", "--cpi0", "3", "--h-kb", "0.8", "--c-hit", "0.4", "--c-miss", "3", "--c-agents", "0.6",
        "--vocab-size", "50000", "--horizon", "128", "--oracle-cost", "4e-5", "--delta-avg", "0.12", "--batch-factor", "4",
        "--amdahl", "0.35,2", "--pipeline", "1,3,1,1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["perf"]["cpi"][0]["cpi"], 4.52);
    assert!((v["perf"]["cpi"][0]["throughput"].as_f64().unwrap() - 5.531e8).abs() < 5.531e5);
    assert!((v["perf"]["complexity"][0]["pruned_seconds"].as_f64().unwrap() - 7.68).abs() < 1e-9);
    assert!((v["perf"]["amdahl"][0]["speedup"].as_f64().unwrap() - 1.2121).abs() < 1e-3);
    assert_eq!(v["perf"]["pipeline"]["stage"], "FV");

    let o = tad(&["perf", "guarded_cohort"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    let amdahl = v["discrepancies"].as_array().unwrap().iter().find(|d| d["quantity"] == "amdahl" && d["at"] == 1).unwrap();
    assert_eq!(amdahl["agrees"], false);
    assert!((amdahl["derived"].as_f64().unwrap() - 1.3043).abs() < 1e-3);
}

#[test]
fn list_names_bundled() {
    let o = tad(&["list"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).lines().any(|l| l == "worked_example"));
}
