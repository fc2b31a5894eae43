// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn scenario() -> PathBuf {
    fixtures().join("scenarios/half_adder")
}

fn poet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poet")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_scenario(out: &Path, extra: &[&str]) -> Output {
    let cfg = scenario().join("poet.toml");
    let design = fixtures().join("designs/half_adder.v");
    let mut args = vec!["run", "--config", s(&cfg), "--design", s(&design), "--out", s(out)];
    args.extend_from_slice(extra);
    poet(&args)
}

#[test]
fn successful_run_writes_front_and_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_scenario(&out, &["--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("pareto_front.json").is_file());
    assert!(stdout(&o).contains("best-power"));
    let snapshot = poet_core::config::RunConfig::from_toml(&std::fs::read_to_string(out.join("config.snapshot")).unwrap()).unwrap();
    let mut expected = poet_core::config::load_config(&scenario().join("poet.toml")).unwrap();
    expected.workers = 2;
    assert_eq!(snapshot, expected);
}

#[test]
fn missing_design_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario().join("poet.toml");
    let o = poet(&["run", "--config", s(&cfg), "--design", "no/such/file.v", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such/file.v"));
}

#[test]
fn budget_exhaustion_exits_three_with_complete_journal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_scenario(&out, &["--budget", "4"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let journal = std::fs::read_to_string(out.join("journal.ndjson")).unwrap();
    let read = poet_core::journal::read_journal(&journal);
    assert!(read.skipped.is_empty());
    assert_eq!(read.events.last().unwrap()["event"], "run_summary");
}

#[test]
fn zero_budget_report_shows_seed_phase_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(run_scenario(&out, &["--budget", "0"]).status.code(), Some(3));
    let o = poet(&["report", "--journal", s(&out.join("journal.ndjson")), "--normalize-time"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("(seed phase only)"), "{}", stdout(&o));
}

#[test]
fn resume_continues_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(run_scenario(&out, &[]).status.code(), Some(0));
    let cfg = scenario().join("poet.toml");
    let o = poet(&["run", "--config", s(&cfg), "--resume", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let journal = std::fs::read_to_string(out.join("journal.ndjson")).unwrap();
    assert_eq!(journal.matches("\"event\":\"run_start\"").count(), 2);
    let o = poet(&["run", "--config", s(&cfg), "--resume", "--out", s(&dir.path().join("absent"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn testbench_command_writes_validated_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tb");
    let design = fixtures().join("designs/seq_detect.v");
    let replies = fixtures().join("difftest/seq_detect");
    let o = poet(&["testbench", "--design", s(&design), "--fixtures", s(&replies), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["stimulus_tb.v", "checking_tb.v", "spec.txt", "vectors.json", "golden.json", "validation.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(std::fs::read_to_string(out.join("validation.txt")).unwrap().contains("validated: true"));
}

fn write_replies(dir: &Path, vectors: &[&str]) {
    let spec = std::fs::read_to_string(fixtures().join("difftest/half_adder/spec.txt")).unwrap();
    std::fs::write(dir.join("spec.txt"), spec).unwrap();
    let mut manifest = vec![serde_json::json!({"tag": "testbench/spec", "file": "spec.txt"})];
    for (i, v) in vectors.iter().enumerate() {
        let name = format!("vectors_{}.txt", i + 1);
        std::fs::write(dir.join(&name), v).unwrap();
        manifest.push(serde_json::json!({"tag": format!("testbench/vectors/{}", i + 1), "file": name}));
    }
    std::fs::write(dir.join("manifest.json"), serde_json::to_string(&manifest).unwrap()).unwrap();
}

#[test]
fn bad_first_vectors_fail_only_with_one_attempt() {
    let dir = tempfile::tempdir().unwrap();
    let replies = dir.path().join("replies");
    std::fs::create_dir(&replies).unwrap();
    write_replies(&replies, &["Sorry, here are no vectors.", "VECTOR both\n0: a=1 b=1\n"]);
    let design = fixtures().join("designs/half_adder.v");
    let o = poet(&["testbench", "--design", s(&design), "--fixtures", s(&replies), "--out", s(&dir.path().join("a")), "--max-attempts", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = poet(&["testbench", "--design", s(&design), "--fixtures", s(&replies), "--out", s(&dir.path().join("b"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("after 2 attempt(s)"));
}

#[test]
fn design_that_does_not_compile_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("half_adder.v");
    std::fs::write(&design, "module half_adder(input a, input b, output sum, output carry);\n  assign sum = a ^ ;\n  assign carry = a & b;\nendmodule\n").unwrap();
    let replies = dir.path().join("replies");
    std::fs::create_dir(&replies).unwrap();
    write_replies(&replies, &["VECTOR both\n0: a=1 b=1\n"; 3]);
    let o = poet(&["testbench", "--design", s(&design), "--fixtures", s(&replies), "--out", s(&dir.path().join("tb"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("compile"), "{}", stderr(&o));
}

#[test]
fn select_command_prints_survivors() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.json");
    std::fs::write(
        &pool,
        r#"[{"id":"A","power":1,"area":1,"delay":1},{"id":"B","power":2,"area":2,"delay":2},
            {"id":"C","metrics":{"power":1.5,"area":0.5,"delay":3}},{"id":"D","power":3,"area":3,"delay":3}]"#,
    )
    .unwrap();
    let o = poet(&["select", "--pool", s(&pool), "-n", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["survivors"], serde_json::json!(["A", "B"]));
    assert_eq!(v["levels"], serde_json::json!([["A", "C"], ["B"], ["D"]]));
    assert_eq!(v["quotas"], serde_json::json!([1, 1, 1]));
    assert_eq!(v["ranks"]["C"], 2);
    let o = poet(&["select", "--pool", s(&pool), "-n", "9"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["survivors"].as_array().unwrap().len(), 4);
}

#[test]
fn select_rejects_bad_pools() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [("empty", "[]"), ("garbage", "{not json"), ("negative", r#"[{"id":"A","power":-1,"area":1,"delay":1}]"#)] {
        let pool = dir.path().join(name);
        std::fs::write(&pool, body).unwrap();
        assert_eq!(poet(&["select", "--pool", s(&pool), "-n", "2"]).status.code(), Some(2), "{name}");
    }
}

#[test]
fn report_on_golden_journal_matches_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let o = poet(&["report", "--journal", s(&scenario().join("golden_journal.ndjson")), "--normalize-time", "--csv", s(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), std::fs::read_to_string(scenario().join("report.txt")).unwrap());
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), std::fs::read_to_string(scenario().join("trajectory.csv")).unwrap());
}

#[test]
fn report_tolerates_truncated_tail_but_not_damage() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario().join("golden_journal.ndjson")).unwrap();
    let cut = dir.path().join("cut.ndjson");
    std::fs::write(&cut, &text[..text.len() - 25]).unwrap();
    let o = poet(&["report", "--journal", s(&cut)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning: line"));
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "{\"event\": ";
    let broken = dir.path().join("broken.ndjson");
    std::fs::write(&broken, lines.join("\n")).unwrap();
    assert_eq!(poet(&["report", "--journal", s(&broken)]).status.code(), Some(2));
}

#[test]
fn fresh_run_journal_reports_every_generation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(run_scenario(&out, &[]).status.code(), Some(0));
    let o = poet(&["report", "--journal", s(&out.join("journal.ndjson"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for g in 0..=3 {
        assert!(text.lines().any(|l| l.trim_start().starts_with(&format!("{g} "))), "generation {g} missing:\n{text}");
    }
}
