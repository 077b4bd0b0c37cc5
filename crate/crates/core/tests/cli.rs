use std::path::Path;
use std::process::{Command, Output};

use ciprecode::harness::ResultTable;

const BIN: &str = env!("CARGO_BIN_EXE_ciprecode");

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env("SOURCE_DATE_EPOCH", "1700000000");
    match threads {
        Some(n) => cmd.env("CIPRECODE_THREADS", n),
        None => cmd.env_remove("CIPRECODE_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn run_to(dir: &Path, name: &str, extra: &[&str], threads: Option<&str>) -> (Output, Vec<u8>) {
    let out = dir.join(name);
    let out_s = out.to_str().unwrap();
    let mut args = vec!["run", "--out", out_s, "--quiet"];
    args.extend_from_slice(extra);
    let o = run(&args, threads);
    let bytes = std::fs::read(&out).unwrap_or_default();
    (o, bytes)
}

#[test]
fn list_scenarios_names_every_id() {
    let o = run(&["list-scenarios"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for id in ["fig2", "fig3", "fig4", "fig5", "fig6", "fig8", "fig9", "table2"] {
        assert!(text.lines().any(|l| l.starts_with(id)), "{id} missing");
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--scenario", "fig2", "--seed", "7", "--trials", "6"];
    let (a, first) = run_to(dir.path(), "a.csv", &args, Some("1"));
    let (b, second) = run_to(dir.path(), "b.csv", &args, Some("3"));
    let (c, third) = run_to(dir.path(), "c.csv", &args, None);
    assert!(a.status.success() && b.status.success() && c.status.success());
    assert!(!first.is_empty());
    assert_eq!(first, second);
    assert_eq!(first, third);

    let args = ["--scenario", "table2", "--seed", "7", "--trials", "4"];
    let (_, first) = run_to(dir.path(), "d.csv", &args, Some("1"));
    let (_, second) = run_to(dir.path(), "e.csv", &args, Some("2"));
    assert_eq!(first, second);
}

#[test]
fn csv_carries_metadata_and_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let (o, bytes) = run_to(
        dir.path(),
        "nested/fig9.csv",
        &["--scenario", "fig9", "--seed", "3", "--trials", "3", "--phi-grid-step", "2"],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with('#'));
    assert!(text.contains("\r\n"));
    let table = ResultTable::from_csv_str(&text).unwrap();
    assert_eq!(table.meta("scenario"), Some("fig9"));
    assert_eq!(table.meta("seed"), Some("3"));
    assert_eq!(table.meta("trials"), Some("3"));
    assert_eq!(table.meta("timestamp"), Some("1700000000"));
    assert!(table.meta("config").unwrap().contains("\"phi_grid_step_deg\":2"));
    assert_eq!(table.rows().len(), 46);
    for row in table.rows() {
        assert!(row.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn different_seeds_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = run_to(dir.path(), "a.csv", &["--scenario", "fig2", "--seed", "1", "--trials", "3"], None);
    let (_, b) = run_to(dir.path(), "b.csv", &["--scenario", "fig2", "--seed", "2", "--trials", "3"], None);
    assert_ne!(a, b);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"antennas": 3, "bogus": 1}"#).unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let small = dir.path().join("small.json");
    std::fs::write(&small, r#"{"antennas": 1}"#).unwrap();
    let small_s = small.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["--scenario", "fig7"],
        vec!["--scenario", "fig2", "--trials", "0"],
        vec!["--scenario", "fig2", "--config", cfg_s],
        vec!["--scenario", "fig2", "--config", small_s],
        vec!["--scenario", "fig2", "--config", "/nonexistent/cfg.json"],
        vec!["--scenario", "fig8", "--phi-grid-step", "0"],
        vec!["--scenario", "fig2", "--seed", "minus-one"],
    ];
    for extra in cases {
        let (o, _) = run_to(dir.path(), "x.csv", &extra, None);
        assert_eq!(o.status.code(), Some(2), "{extra:?}");
    }
    let (o, _) = run_to(dir.path(), "x.csv", &["--scenario", "fig2", "--trials", "1"], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["run", "--scenario", "fig2"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.json");
    std::fs::write(&cfg, r#"{"channel_power_db": [-3000]}"#).unwrap();
    let (o, _) = run_to(
        dir.path(),
        "x.csv",
        &["--scenario", "fig2", "--trials", "1", "--config", cfg.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
}
