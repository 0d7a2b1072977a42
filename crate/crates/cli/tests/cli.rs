use std::process::Command;

use trajphase_cli::config::preset;
use trajphase_cli::output::parse_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trajphase"))
}

fn run_to(dir: &std::path::Path, name: &str, args: &[&str]) -> String {
    let out = dir.join(name);
    let status = bin().args(args).arg("--quiet").arg("--out").arg(&out).status().unwrap();
    assert!(status.success(), "{args:?}");
    std::fs::read_to_string(out).unwrap()
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["jump-sample", "--preset", "jump-ensemble", "--seed", "9"];
    let a = run_to(dir.path(), "a.csv", &args);
    let b = run_to(dir.path(), "b.csv", &args);
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(dir.path().join("a.ensemble.csv")).unwrap(),
        std::fs::read(dir.path().join("b.ensemble.csv")).unwrap()
    );
    let c = run_to(dir.path(), "c.csv", &["jump-sample", "--preset", "jump-ensemble", "--seed", "10"]);
    assert_ne!(a, c);
    assert!(dir.path().join("a.report.json").exists());
}

/// The QSD preset with fewer trajectories.
fn small_qsd(dir: &std::path::Path) -> std::path::PathBuf {
    let text = preset("qsd-dephasing").unwrap().replace("n_trajectories = 100000", "n_trajectories = 4000");
    assert!(text.contains("4000"));
    let path = dir.join("qsd.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_qsd(dir.path());
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let status = bin()
            .env("TRAJPHASE_THREADS", threads)
            .args(["qsd-phase", "--quiet", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--seed", "3"])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(out).unwrap()
    };
    assert_eq!(run("1", "one.csv"), run("2", "two.csv"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\ndim = 2\nlambda = 0.1\nhamiltonian = { preset = \"zeeman\" }\n").unwrap();
    let out = bin().args(["evolve", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("initial_state") && err.contains("line"), "{err}");

    let out = bin().args(["evolve"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["evolve", "--preset", "fig1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "evolve rejects a sweep");
}

#[test]
fn report_lists_outputs_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    run_to(dir.path(), "e.csv", &["evolve", "--preset", "dephasing", "--steps", "100"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.report.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "evolve");
    assert_eq!(report["config_digest"].as_str().unwrap().len(), 64);
    assert_eq!(report["outputs"].as_array().unwrap().len(), 1);
    let (_, rows) = parse_csv(&std::fs::read_to_string(dir.path().join("e.csv")).unwrap());
    assert_eq!(rows.len(), 101);
}

#[test]
fn qsd_rows_carry_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_qsd(dir.path());
    let text = run_to(dir.path(), "q.csv", &["qsd-phase", "--config", cfg.to_str().unwrap()]);
    let (h, rows) = parse_csv(&text);
    let col = |n: &str| h.iter().position(|c| c == n).unwrap();
    for r in &rows {
        let arg: f64 = r[col("tracked_arg")].parse().unwrap();
        let se: f64 = r[col("arg_std_error")].parse().unwrap();
        let cf: f64 = r[col("closed_form_arg")].parse().unwrap();
        assert!((arg - cf).abs() <= 3.0 * se, "{arg} vs {cf} (SE {se})");
    }
}
