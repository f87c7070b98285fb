//! End-to-end tests of the `fxc` binary: exit-code contract, determinism of
//! CSV output, and the shape of the analysis reports.

use std::path::Path;
use std::process::{Command, Output};

fn fxc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fxc"))
        .args(args)
        .current_dir(dir)
        .env_remove("FXC_SEED")
        .output()
        .expect("spawn fxc")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &serde_json::Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(json).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn memory_config(trials: usize, p: &[f64], seed: u64, output: &str) -> serde_json::Value {
    serde_json::json!({
        "experiment": {
            "name": "cli-test",
            "kind": "memory",
            "side": "primal",
            "rounds": 2,
            "trials": trials
        },
        "code": "toric:2:3",
        "noise": { "phenomenological": { "p": p } },
        "window": { "w": 1, "c": 1 },
        "seed": seed,
        "output": output
    })
}

#[test]
fn malformed_code_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = fxc(&["build", "--code", "toric:9:3", "--rep", "rep:full:2"], dir.path());
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_of(&out));
    let out = fxc(&["build", "--code", "nonsense", "--rep", "rep:full:2"], dir.path());
    assert_eq!(exit_code(&out), 2);
    let out = fxc(&["build", "--code", "toric:2:3", "--rep", "toric:2:3"], dir.path());
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = memory_config(10, &[0.01], 1, "out.csv");
    cfg["unknown_key"] = serde_json::json!(true);
    let path = write_config(dir.path(), "bad.json", &cfg);
    let out = fxc(&["simulate", "--config", &path], dir.path());
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_of(&out));

    // invalid window (c > w) is a config-level error as well
    let mut cfg = memory_config(10, &[0.01], 1, "out.csv");
    cfg["window"] = serde_json::json!({ "w": 1, "c": 2 });
    let path = write_config(dir.path(), "badwin.json", &cfg);
    let out = fxc(&["simulate", "--config", &path], dir.path());
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_of(&out));
}

#[test]
fn corrupted_complex_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let fc = dir.path().join("fc.json");
    let out = fxc(
        &[
            "build",
            "--code",
            "toric:2:3",
            "--rep",
            "rep:full:2",
            "--out",
            fc.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    // a valid file analyzes cleanly
    let out = fxc(&["analyze", fc.to_str().unwrap()], dir.path());
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    // flip one entry of one boundary map: shapes stay valid, d.d = 0 breaks
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fc).unwrap()).unwrap();
    let entries = value["complex"]["boundaries"][0]["entries"]
        .as_array_mut()
        .unwrap();
    entries.remove(0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&value).unwrap()).unwrap();
    let out = fxc(&["analyze", bad.to_str().unwrap()], dir.path());
    assert_eq!(exit_code(&out), 3, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("chain condition"));
}

#[test]
fn analyze_report_has_expected_keys() {
    let dir = tempfile::tempdir().unwrap();
    let fc = dir.path().join("fc.json");
    let out = fxc(
        &[
            "build",
            "--code",
            "toric:3:2",
            "--rep",
            "rep:cyclic:2",
            "--out",
            fc.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let report = dir.path().join("report.json");
    let out = fxc(
        &[
            "analyze",
            fc.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["kunneth", "distances", "logicals", "single_shot_blocks"] {
        assert!(report.get(key).is_some(), "missing key {key}");
    }
    for key in ["primal_corr", "primal_err", "dual_corr", "dual_err"] {
        assert!(report["logicals"].get(key).is_some(), "missing logicals.{key}");
    }
    // the 3D toric code has redundant X checks, so the cyclic foliation
    // carries single-shot metacheck blocks
    assert_eq!(report["single_shot_blocks"], serde_json::json!(true));
}

#[test]
fn simulate_is_deterministic_and_zero_noise_never_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = memory_config(50, &[0.0, 0.03], 42, "run.csv");
    let path = write_config(dir.path(), "run.json", &cfg);

    let out = fxc(&["simulate", "--config", &path], dir.path());
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let first = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();

    // header + one row per noise point
    let lines: Vec<&str> = first.trim().lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("experiment,kind,code,"));
    // p = 0: zero failures
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[9], "0", "noise_param");
    assert_eq!(fields[11], "0", "failures at p=0");

    // a rerun to a fresh file is byte-identical
    let out = fxc(
        &["simulate", "--config", &path, "--out", "rerun.csv"],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let second = std::fs::read_to_string(dir.path().join("rerun.csv")).unwrap();
    assert_eq!(first, second);

    // appending to an existing file does not repeat the header
    let out = fxc(&["simulate", "--config", &path], dir.path());
    assert_eq!(exit_code(&out), 0);
    let appended = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(appended.matches("experiment,kind,").count(), 1);
    assert_eq!(appended.trim().lines().count(), 5);
}

#[test]
fn fit_on_single_size_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    let mut text = String::from(
        "experiment,kind,code,L,D,side,w,c,rounds,noise_param,trials,failures,rate,stderr,seed\n",
    );
    for (p, f) in [(0.05, 120), (0.07, 400), (0.09, 900)] {
        text.push_str(&format!(
            "t,memory,toric:2:9,9,2,primal,1,1,9,{p},10000,{f},0,0,1\n"
        ));
    }
    std::fs::write(&csv, text).unwrap();
    let out = fxc(
        &["fit", csv.to_str().unwrap(), "--resamples", "10"],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 5, "stderr: {}", stderr_of(&out));
}

#[test]
fn fit_missing_column_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("short.csv");
    std::fs::write(&csv, "L,noise_param,trials\n9,0.05,100\n").unwrap();
    let out = fxc(&["fit", csv.to_str().unwrap()], dir.path());
    assert_eq!(exit_code(&out), 5, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("failures"));
}

#[test]
fn build_summary_reports_known_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let out = fxc(&["build", "--code", "toric:2:3", "--rep", "rep:full:2"], dir.path());
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(summary["k_dual"], serde_json::json!(2));
    assert_eq!(summary["d_dual"], serde_json::json!(3));
}
