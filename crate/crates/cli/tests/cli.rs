use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lbeval(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbeval"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn lbeval")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "lbeval failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// CSV body of a named table in streamed output.
fn table<'a>(text: &'a str, name: &str) -> Vec<&'a str> {
    let marker = format!("# table: {name}");
    text.lines()
        .skip_while(|l| *l != marker)
        .skip(1)
        .take_while(|l| !l.is_empty() && !l.starts_with("# table:"))
        .collect()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let f = Fixture { dir };
        f.write(
            "qrels.txt",
            "q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 1\nq3 0 d5 1\nq4 0 d7 1\nq5 0 d9 1\nq6 0 d11 1\n",
        );
        f.write(
            "a.run",
            "q1 Q0 d1 1 3.0 runA\nq1 Q0 d2 2 2.0 runA\nq2 Q0 d3 1 5 runA\nq3 Q0 d6 1 2 runA\nq3 Q0 d5 2 1 runA\n\
             q4 Q0 d7 1 1 runA\nq5 Q0 d8 1 1 runA\nq6 Q0 d11 1 1 runA\n",
        );
        f.write(
            "b.run",
            "q1 Q0 d2 1 3.0 runB\nq1 Q0 d1 2 2.0 runB\nq2 Q0 d4 1 5 runB\nq2 Q0 d3 2 4 runB\nq3 Q0 d5 1 1 runB\n\
             q4 Q0 d8 1 2 runB\nq5 Q0 d9 1 1 runB\nq6 Q0 d12 1 1 runB\n",
        );
        f
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn run(&self, args: &[&str]) -> Output {
        lbeval(self.dir.path(), args)
    }
}

#[test]
fn eval_single_run_has_per_query_rows_and_aggregate() {
    let f = Fixture::new();
    let text = stdout(&f.run(&["eval", "--run", "a.run", "--qrels", "qrels.txt", "--metric", "rr@10"]));
    let rows = table(&text, "scores");
    assert_eq!(rows[0], "run_id,query_id,rr@10");
    assert_eq!(rows.len(), 1 + 6 + 1);
    assert_eq!(rows[1], "runA,q1,1.0000");
    assert_eq!(rows[3], "runA,q3,0.5000");
    assert_eq!(rows[5], "runA,q5,0.0000");
    // (1 + 1 + 0.5 + 1 + 0 + 1) / 6
    assert_eq!(rows[7], "runA,all,0.7500");
    assert!(text.contains("# input: qrels.txt sha256="));
}

#[test]
fn bootstrap_is_byte_identical_across_invocations() {
    let f = Fixture::new();
    let args = [
        "bootstrap", "--run", "a.run", "--run", "b.run", "--qrels", "qrels.txt", "--metric", "rr@10",
        "--trials", "1000", "--seed", "42",
    ];
    let first = f.run(&args);
    let second = f.run(&args);
    assert_eq!(stdout(&first), stdout(&second));
    let text = stdout(&first);
    assert!(text.contains("# seed: 42"));
    assert!(text.contains("# trials: 1000"));
    let rows = table(&text, "ranks");
    assert!(rows[0].ends_with("rank_1_pct,rank_2_pct"));

    let mut dirs = Vec::new();
    for out in ["o1", "o2"] {
        let mut a = args.to_vec();
        a.extend(["--out-dir", out, "--format", "json"]);
        stdout(&f.run(&a));
        dirs.push(fs::read(f.dir.path().join(out).join("bootstrap.json")).unwrap());
    }
    assert_eq!(dirs[0], dirs[1]);
}

#[test]
fn percentages_in_a_row_sum_to_one_hundred() {
    let f = Fixture::new();
    let text = stdout(&f.run(&[
        "bootstrap", "--run", "a.run", "--run", "b.run", "--qrels", "qrels.txt", "--metric", "rr@10", "--seed", "7",
    ]));
    for row in table(&text, "ranks").iter().skip(1) {
        let cells: Vec<&str> = row.split(',').collect();
        let total: f64 = cells[9..].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((total - 100.0).abs() < 0.11, "{row}");
    }
}

#[test]
fn csv_and_json_agree_after_rounding() {
    let f = Fixture::new();
    let base = [
        "bootstrap", "--run", "a.run", "--run", "b.run", "--qrels", "qrels.txt", "--metric", "rr@10", "--seed", "5",
        "--trials", "300",
    ];
    let csv = stdout(&f.run(&base));
    let mut json_args = base.to_vec();
    json_args.extend(["--format", "json"]);
    let doc: Value = serde_json::from_str(&stdout(&f.run(&json_args))).unwrap();
    let dist = &doc["report"]["distribution"];
    let ids: Vec<&str> = dist["run_ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for row in table(&csv, "ranks").iter().skip(1) {
        let cells: Vec<&str> = row.split(',').collect();
        let r = ids.iter().position(|id| *id == cells[0]).unwrap();
        let expected = dist["expected_rank"][r].as_f64().unwrap();
        assert_eq!(cells[3], format!("{expected:.4}"));
        let p = dist["proportions"][r][0].as_f64().unwrap();
        assert_eq!(cells[9], format!("{:.1}", 100.0 * p));
    }
    assert_eq!(doc["provenance"]["config"]["seed"], "5");
}

#[test]
fn malformed_run_exits_one_and_names_the_line() {
    let f = Fixture::new();
    f.write("bad.run", "q1 Q0 d1 1 3.0 runA\nq1 Q0 d2 2 oops runA\n");
    let out = f.run(&[
        "agreement", "--run", "a.run", "--run", "bad.run", "--qrels", "qrels.txt", "--metric", "rr@10", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.run:2"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_file_exits_one() {
    let f = Fixture::new();
    let out = f.run(&["eval", "--run", "nope.run", "--qrels", "qrels.txt", "--metric", "rr@10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.run"));
}

#[test]
fn seed_is_never_taken_from_the_environment() {
    let f = Fixture::new();
    let out = Command::new(env!("CARGO_BIN_EXE_lbeval"))
        .current_dir(f.dir.path())
        .env("LBEVAL_SEED", "42")
        .args(["bootstrap", "--run", "a.run", "--qrels", "qrels.txt", "--metric", "rr@10"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn agreement_grid_has_table_four_shape() {
    let f = Fixture::new();
    let text = stdout(&f.run(&[
        "agreement", "--run", "a.run", "--run", "b.run", "--qrels", "qrels.txt", "--metric", "rr@10", "--seed", "3",
        "--splits", "20",
    ]));
    let grid = table(&text, "grid");
    assert_eq!(
        grid[0],
        "measure,sign/mean,wx-rs/mean,wx-sr/mean,t/mean,sign/median,wx-rs/median,wx-sr/median"
    );
    let measures: Vec<&str> = grid[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(measures, ["agree", "partial", "disagree", "perc_signif"]);
    let column = |i: usize| -> Vec<f64> { grid[1..4].iter().map(|r| r.split(',').nth(i).unwrap().parse().unwrap()).collect() };
    for i in 1..=7 {
        let total: f64 = column(i).iter().sum();
        assert!((total - 100.0).abs() < 0.2);
    }
    let signif: Vec<&str> = grid[4].split(',').collect();
    assert_eq!(signif[1..4], signif[5..8]);

    let with_t = stdout(&f.run(&[
        "agreement", "--run", "a.run", "--run", "b.run", "--qrels", "qrels.txt", "--metric", "rr@10", "--seed", "3",
        "--include-t-median",
    ]));
    assert!(table(&with_t, "grid")[0].ends_with(",t/median"));
}

#[test]
fn scale_check_reports_unsolvable_reciprocal_rank() {
    let f = Fixture::new();
    let text = stdout(&f.run(&["scale-check", "--metric", "rr@3", "--depth", "3", "--grades", "2"]));
    let values: Vec<&str> = table(&text, "states")
        .iter()
        .skip(1)
        .map(|r| r.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(values, ["1", "1", "1", "1", "1/2", "1/2", "1/3", "0"]);
    let summary = table(&text, "summary");
    assert!(summary.contains(&"equi_spaced,false"));
    assert!(summary.contains(&"solvable,false"));
    assert!(summary.contains(&"witness_gap,1/6"));
    assert!(summary.contains(&"unrealizable,1/6 5/6"));
}

#[test]
fn scale_check_rejects_ndcg() {
    let f = Fixture::new();
    let out = f.run(&["scale-check", "--metric", "ndcg@3", "--depth", "3", "--grades", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn monitor_flags_third_run_in_a_month_and_traces_sota() {
    let f = Fixture::new();
    f.write(
        "manifest.toml",
        r#"task_id = "toy"

[[submission]]
run_id = "base"
group_id = "organizers"
date = "2019-12-01"
description = "baseline"
path = "a.run"
baseline = true

[[submission]]
run_id = "x1"
group_id = "g"
date = "2020-01-05"
description = "one"
path = "a.run"
baseline = false

[[submission]]
run_id = "x2"
group_id = "g"
date = "2020-01-20"
description = "two"
path = "b.run"
baseline = false

[[submission]]
run_id = "x3"
group_id = "g"
date = "2020-01-25"
description = "three"
path = "b.run"
baseline = false
"#,
    );
    f.write("scores.csv", "run_id,score\nbase,0.30\nx1,0.25\nx2,0.40\nx3,0.45\n");
    let text = stdout(&f.run(&["monitor", "--manifest", "manifest.toml", "--scores", "scores.csv"]));
    let violations = table(&text, "violations");
    assert_eq!(violations.len(), 2, "{violations:?}");
    assert!(violations[1].starts_with("x3,g,2020-01-25,"));
    let trajectory = table(&text, "trajectory");
    assert_eq!(trajectory[0], "date,run_id,score,baseline,is_sota");
    let sota: Vec<&str> = trajectory[1..]
        .iter()
        .filter(|r| r.ends_with(",true"))
        .map(|r| r.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(sota, ["x2", "x3"]);
    assert!(text.contains("# baseline_score: 0.3"));
    let groups = table(&text, "groups");
    assert_eq!(groups[1], "g,3,2020-01-05,2020-01-25");

    let scored = stdout(&f.run(&[
        "monitor", "--manifest", "manifest.toml", "--qrels", "qrels.txt", "--metric", "rr@10", "--format", "json",
    ]));
    let doc: Value = serde_json::from_str(&scored).unwrap();
    assert_eq!(doc["report"]["trajectory"].as_array().unwrap().len(), 4);
}

#[test]
fn holdout_writes_one_file_per_table() {
    let f = Fixture::new();
    f.write("part.toml", "public = [\"q1\", \"q2\", \"q3\"]\nprivate = [\"q4\", \"q5\", \"q6\"]\n");
    let out = f.run(&[
        "holdout", "--run", "a.run", "--run", "b.run", "--qrels", "bin=qrels.txt", "--partition", "part.toml",
        "--metric", "rr@10", "--metric", "ap", "--seed", "9", "--trials", "200", "--focus", "runA", "--out-dir", "rep",
    ]);
    stdout(&out);
    let dir = f.dir.path().join("rep");
    for name in ["leaderboards", "focus", "pruned"] {
        assert!(dir.join(format!("holdout-{name}.csv")).is_file(), "{name}");
    }
    let focus = fs::read_to_string(dir.join("holdout-focus.csv")).unwrap();
    assert!(focus.starts_with("# lbeval "));
    assert_eq!(focus.lines().filter(|l| l.contains(",runA,")).count(), 4);
}
