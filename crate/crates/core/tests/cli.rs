//! End-to-end checks of the command-line binary: output shape, exit codes
//! and error messages.

use std::process::{Command, Output};

fn discdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_discdiff")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn forward_on_uniform_data_has_zero_kl() {
    let text = stdout(&discdiff(&["forward", "--dist", "uniform", "--S", "3", "--d", "2", "--times", "0,1"]));
    assert!(text.starts_with("# config: "));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r[1].parse::<f64>().unwrap().abs() < 1e-14);
    }
}

#[test]
fn schedule_reports_the_horizon() {
    let text = stdout(&discdiff(&["schedule", "--eps", "0.01", "--d", "4", "--S", "2"]));
    let rows = data_rows(&text);
    let horizon: f64 = rows[0][1].parse().unwrap();
    assert!((horizon - (4.0 * 2f64.ln() / 0.01).ln()).abs() < 1e-12);
}

#[test]
fn sample_writes_one_row_per_trial() {
    let text = stdout(&discdiff(&[
        "sample", "--dist", "point:0", "--S", "2", "--d", "2", "--grid", "0.25,0.25,4", "--trials", "50",
    ]));
    assert_eq!(data_rows(&text).len(), 50);
    assert!(text.lines().any(|l| l.starts_with("# summary: ")));
}

#[test]
fn seed_changes_samples() {
    let base = ["sample", "--dist", "uniform", "--S", "3", "--d", "2", "--grid", "0.25,0.1,4", "--trials", "40"];
    let a = stdout(&discdiff(&[&base[..], &["--seed", "1"]].concat()));
    let b = stdout(&discdiff(&[&base[..], &["--seed", "2"]].concat()));
    assert_ne!(data_rows(&a), data_rows(&b));
}

#[test]
fn config_errors_exit_with_code_two() {
    for args in [
        vec!["forward", "--dist", "uniform", "--S", "2"],
        vec!["forward", "--dist", "gauss", "--S", "2", "--d", "1"],
        vec!["eps-score", "--dist", "uniform", "--S", "2", "--d", "1", "--grid", "0.1,0.1"],
        vec!["eps-score", "--dist", "/nonexistent/law.json"],
        vec!["eps-score", "--dist", "uniform", "--S", "2", "--d", "1", "--grid", "0.1,0,2", "--estimator", "file:/nonexistent.csv"],
        vec!["bounds", "--S", "2", "--d", "1"],
    ] {
        let out = discdiff(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    }
}

#[test]
fn numerical_errors_exit_with_code_one() {
    // A point mass with no early stopping has an undefined path KL.
    let out = discdiff(&["path-kl", "--dist", "point:0", "--S", "2", "--d", "1", "--grid", "0.25,0,4"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_must_match_the_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"command":"forward","dist":"uniform","S":2,"d":1}"#).unwrap();
    let out = discdiff(&["schedule", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&cfg, r#"{"command":"forward","dist":"uniform","S":2,"d":1,"bogus":1}"#).unwrap();
    let out = discdiff(&["forward", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"command":"forward","dist":"uniform","S":2,"d":1,"times":[0.5]}"#).unwrap();
    let text = stdout(&discdiff(&["forward", "--config", cfg.to_str().unwrap(), "--times", "1,2,3"]));
    assert_eq!(data_rows(&text).len(), 3);
}
