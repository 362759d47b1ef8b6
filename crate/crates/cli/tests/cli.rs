//! End-to-end tests of the satkit binary: exit codes, output formats, and
//! the gen/label/train/solve pipeline.

use std::path::Path;
use std::process::{Command, Output};

use satkit_core::cnf::parse_dimacs;

fn satkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf8 stdout")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("utf8 stderr")
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf8 path")
}

const SAT_CNF: &str = "p cnf 3 2\n1 -3 2 0\n-2 3 0\n";
const UNSAT_CNF: &str = "p cnf 1 2\n1 0\n-1 0\n";

#[test]
fn solving_a_satisfiable_file_prints_verdict_decisions_and_a_valid_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    std::fs::write(&cnf, SAT_CNF).unwrap();

    let output = satkit(&["solve", "--input", path_str(&cnf), "--heuristic", "jw"]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "SAT");
    let decisions: u64 = lines[1].strip_prefix("decisions ").unwrap().parse().unwrap();
    assert!(decisions <= 3);

    let body = lines[2].strip_prefix("v ").unwrap().strip_suffix(" 0").unwrap();
    let formula = parse_dimacs(SAT_CNF).unwrap();
    let mut values = vec![false; formula.num_vars()];
    for token in body.split(' ') {
        let lit: i64 = token.parse().unwrap();
        values[(lit.unsigned_abs() - 1) as usize] = lit > 0;
    }
    assert!(formula.satisfied_by(&values));
}

#[test]
fn solving_an_unsatisfiable_file_prints_no_witness_line() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    std::fs::write(&cnf, UNSAT_CNF).unwrap();

    for solver in ["dpll", "cdcl"] {
        let output = satkit(&["solve", "--input", path_str(&cnf), "--solver", solver]);
        assert!(output.status.success());
        let text = stdout(&output);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "UNSAT");
        assert!(lines[1].starts_with("decisions "));
        assert_eq!(lines.len(), 2);
    }
}

#[test]
fn a_zero_decision_cap_reports_a_step_limit() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    // Two free binary clauses force at least one branching decision.
    std::fs::write(&cnf, "p cnf 2 2\n1 2 0\n-1 -2 0\n").unwrap();

    let output = satkit(&["solve", "--input", path_str(&cnf), "--cap", "0"]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.starts_with("STEP-LIMIT\ndecisions 0"));
}

#[test]
fn neural_solving_without_a_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    std::fs::write(&cnf, SAT_CNF).unwrap();

    for heuristic in ["neural", "hybrid"] {
        let output = satkit(&["solve", "--input", path_str(&cnf), "--heuristic", heuristic]);
        assert!(!output.status.success());
        let diagnostic = stderr(&output);
        assert_eq!(diagnostic.lines().count(), 1);
        assert!(diagnostic.contains("--model"));
    }
}

#[test]
fn unreadable_input_files_fail_with_a_one_line_diagnostic() {
    let output = satkit(&["solve", "--input", "/nonexistent/f.cnf"]);
    assert!(!output.status.success());
    let diagnostic = stderr(&output);
    assert_eq!(diagnostic.lines().count(), 1);
    assert!(diagnostic.contains("/nonexistent/f.cnf"));
}

#[test]
fn unknown_flags_are_rejected() {
    let output = satkit(&["solve", "--frobnicate"]);
    assert!(!output.status.success());
    assert!(!stderr(&output).is_empty());
}

#[test]
fn a_corrupt_checkpoint_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    let ckpt = dir.path().join("bad.ckpt");
    std::fs::write(&cnf, SAT_CNF).unwrap();
    std::fs::write(&ckpt, b"not a checkpoint").unwrap();

    let output = satkit(&[
        "solve",
        "--input",
        path_str(&cnf),
        "--heuristic",
        "neural",
        "--model",
        path_str(&ckpt),
    ]);
    assert!(!output.status.success());
    let diagnostic = stderr(&output);
    assert_eq!(diagnostic.lines().count(), 1);
    assert!(diagnostic.contains("checkpoint"));
}

#[test]
fn generation_is_deterministic_and_labeling_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ds");
    let b = dir.path().join("b.ds");
    for out in [&a, &b] {
        let output = satkit(&[
            "gen", "--n", "5", "--count", "4", "--seed", "7", "--out", path_str(out),
        ]);
        assert!(output.status.success(), "stderr: {}", stderr(&output));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let labeled1 = dir.path().join("l1.ds");
    let labeled2 = dir.path().join("l2.ds");
    let output = satkit(&["label", "--input", path_str(&a), "--out", path_str(&labeled1)]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let output = satkit(&["label", "--input", path_str(&labeled1), "--out", path_str(&labeled2)]);
    assert!(output.status.success());
    assert_eq!(std::fs::read(&labeled1).unwrap(), std::fs::read(&labeled2).unwrap());
    assert_ne!(bytes, std::fs::read(&labeled1).unwrap());
}

#[test]
fn the_gen_label_train_solve_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.ds");
    let labeled = dir.path().join("labeled.ds");
    let ckpt = dir.path().join("model.ckpt");
    let metrics = dir.path().join("metrics.csv");
    let cnf = dir.path().join("f.cnf");
    std::fs::write(&cnf, SAT_CNF).unwrap();

    assert!(satkit(&["gen", "--n", "4", "--count", "6", "--seed", "3", "--out", path_str(&raw)])
        .status
        .success());
    assert!(satkit(&["label", "--input", path_str(&raw), "--out", path_str(&labeled)])
        .status
        .success());

    let output = satkit(&[
        "train",
        "--data",
        path_str(&labeled),
        "--dim",
        "4",
        "--iters",
        "2",
        "--batch",
        "4",
        "--steps",
        "8",
        "--lr",
        "1e-3",
        "--eval-every",
        "4",
        "--seed",
        "1",
        "--out",
        path_str(&ckpt),
        "--metrics",
        path_str(&metrics),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    assert!(stdout(&output).starts_with("trained 8 steps:"));

    let metrics_text = std::fs::read_to_string(&metrics).unwrap();
    let steps: Vec<&str> = metrics_text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(steps, vec!["1", "4", "8"]);

    for heuristic in ["neural", "hybrid"] {
        let output = satkit(&[
            "solve",
            "--input",
            path_str(&cnf),
            "--heuristic",
            heuristic,
            "--model",
            path_str(&ckpt),
        ]);
        assert!(output.status.success(), "stderr: {}", stderr(&output));
        assert!(stdout(&output).starts_with("SAT\n"));
    }
}

#[test]
fn training_rejects_an_odd_batch_size() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.ds");
    assert!(satkit(&["gen", "--n", "4", "--count", "4", "--seed", "0", "--out", path_str(&raw)])
        .status
        .success());
    let output = satkit(&[
        "train",
        "--data",
        path_str(&raw),
        "--batch",
        "3",
        "--out",
        path_str(&dir.path().join("m.ckpt")),
        "--metrics",
        path_str(&dir.path().join("m.csv")),
    ]);
    assert!(!output.status.success());
    assert!(stderr(&output).contains("--batch"));
}

#[test]
fn the_solve_rate_bench_without_sizes_writes_a_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rates.csv");
    let output = satkit(&["bench1", "--out", path_str(&out)]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "heuristic,n,count,cap,solved,solve_rate,seed\n"
    );
}

#[test]
fn the_solve_rate_bench_replays_bit_identically_and_draws_a_chart() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    let svg = dir.path().join("a.svg");
    for out in [&first, &second] {
        let output = satkit(&[
            "bench1", "--sizes", "4,5", "--count", "6", "--seed", "11", "--out", path_str(out),
            "--svg", path_str(&svg),
        ]);
        assert!(output.status.success(), "stderr: {}", stderr(&output));
    }
    let text = std::fs::read_to_string(&first).unwrap();
    assert_eq!(text, std::fs::read_to_string(&second).unwrap());
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn the_duel_bench_partitions_every_size_class() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.ds");
    let labeled = dir.path().join("labeled.ds");
    let ckpt = dir.path().join("model.ckpt");
    let out = dir.path().join("duel.csv");

    assert!(satkit(&["gen", "--n", "4", "--count", "6", "--seed", "5", "--out", path_str(&raw)])
        .status
        .success());
    assert!(satkit(&["label", "--input", path_str(&raw), "--out", path_str(&labeled)])
        .status
        .success());
    assert!(satkit(&[
        "train", "--data", path_str(&labeled), "--dim", "4", "--iters", "2", "--batch", "4",
        "--steps", "5", "--out", path_str(&ckpt), "--metrics",
        path_str(&dir.path().join("m.csv")),
    ])
    .status
    .success());

    let output = satkit(&[
        "bench2", "--sizes", "4,5", "--count", "8", "--seed", "2", "--model", path_str(&ckpt),
        "--out", path_str(&out),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "solver,n,count,wins,draws,losses,win_pct,draw_pct,loss_pct,seed"
    );
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let count: usize = fields[2].parse().unwrap();
        let wins: usize = fields[3].parse().unwrap();
        let draws: usize = fields[4].parse().unwrap();
        let losses: usize = fields[5].parse().unwrap();
        assert_eq!(wins + draws + losses, count);
        assert_eq!(fields[0], "dpll");
    }
}

#[test]
fn the_duel_bench_requires_a_model() {
    let output = satkit(&["bench2", "--sizes", "4", "--out", "/tmp/never-written.csv"]);
    assert!(!output.status.success());
}

#[test]
fn the_aggregation_bench_shares_one_eval_set_across_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let output = satkit(&[
        "bench3", "--n", "5", "--iters", "1,2", "--replicas", "3", "--dim", "4", "--batch", "4",
        "--steps", "12", "--train-pairs", "6", "--eval-pairs", "3", "--seed", "4", "--out",
        path_str(&out),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,iterations,aggregation,replicas_trained,replicas_kept,flagged,policy_error_mean,policy_error_std,eval_hash,seed"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let modes: Vec<&str> = rows.iter().map(|r| r[2]).collect();
    assert_eq!(modes, vec!["mean", "attention", "mean", "attention"]);
    let hashes: Vec<&str> = rows.iter().map(|r| r[8]).collect();
    assert!(hashes.iter().all(|&h| h == hashes[0] && h.len() == 64));
}

#[test]
fn the_aggregation_bench_rejects_too_few_replicas() {
    let output = satkit(&["bench3", "--replicas", "2", "--out", "/tmp/never-written.csv"]);
    assert!(!output.status.success());
    assert!(stderr(&output).contains("--replicas"));
}
