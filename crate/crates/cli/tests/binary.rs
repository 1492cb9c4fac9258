use std::process::{Command, Output};

use dilind_cli::CommandError;
use dilind_core::Error;
use serde_json::Value;
use tempfile::TempDir;

fn dilind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dilind")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn report_goes_to_stdout_or_out_file() {
    let dir = TempDir::new().unwrap();
    let problem = write(&dir, "p.json", r#"{"matrix": [[0, 1], [-1, 0]]}"#);
    let run = dilind(&["analyze", &problem]);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(json(&run.stdout)["output"]["isotropy"]["variant"], "Lattice");

    let out = dir.path().join("report.json");
    let run = dilind(&["analyze", &problem, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    assert!(run.stdout.is_empty());
    let report = json(&std::fs::read(&out).unwrap());
    assert_eq!(report["command"], "analyze");
}

#[test]
fn csv_is_written_to_the_requested_path_or_embedded() {
    let dir = TempDir::new().unwrap();
    let problem = write(
        &dir,
        "o.json",
        r#"{"matrix": [[0, 1], [-1, 0]], "point": [1, 0], "tGrid": {"start": 0, "end": 1, "count": 5}}"#,
    );
    let csv = dir.path().join("orbit.csv");
    let run = dilind(&["export-orbit", &problem, "--csv", csv.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(!text.contains('\r'));
    assert_eq!(json(&run.stdout)["output"]["csvPath"], csv.to_str().unwrap());

    let run = dilind(&["export-orbit", &problem]);
    assert_eq!(json(&run.stdout)["output"]["csv"].as_str().unwrap(), text);
}

#[test]
fn seed_flag_overrides_and_satisfies_the_document() {
    let dir = TempDir::new().unwrap();
    let problem = write(&dir, "w.json", r#"{"matrix": [[0, 1], [-1, 0]], "seed": 1}"#);
    let run = dilind(&["witness", &problem, "--seed", "99"]);
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(json(&run.stdout)["seeds"], serde_json::json!([99]));

    let unseeded = write(&dir, "u.json", r#"{"matrix": [[0, 1], [-1, 0]]}"#);
    assert_eq!(dilind(&["witness", &unseeded]).status.code(), Some(2));
    assert_eq!(dilind(&["witness", &unseeded, "--seed", "4"]).status.code(), Some(0));
}

#[test]
fn validation_errors_exit_two_with_every_error_listed() {
    let dir = TempDir::new().unwrap();
    let problem = write(&dir, "bad.json", r#"{"matrix": [[1, 2], [3, 4], [5, 6]], "p": 0.5}"#);
    let run = dilind(&["decide", &problem]);
    assert_eq!(run.status.code(), Some(2));
    let err = json(&run.stdout);
    assert_eq!(err["error"]["tag"], "ValidationFailed");
    let paths: Vec<&str> = err["error"]["errors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["path"].as_str().unwrap())
        .collect();
    for expected in ["$.matrix", "$.times", "$.p", "$.seed"] {
        assert!(paths.iter().any(|p| p.starts_with(expected)), "{expected} missing from {paths:?}");
    }
}

#[test]
fn document_command_must_match_the_invocation() {
    let dir = TempDir::new().unwrap();
    let problem = write(&dir, "c.json", r#"{"command": "decide", "matrix": [[1]]}"#);
    let run = dilind(&["analyze", &problem]);
    assert_eq!(run.status.code(), Some(2));
    assert_eq!(json(&run.stdout)["error"]["errors"][0]["path"], "$.command");
}

#[test]
fn malformed_json_exits_two() {
    let dir = TempDir::new().unwrap();
    let problem = write(&dir, "m.json", "{\"matrix\": [[1]");
    let run = dilind(&["analyze", &problem]);
    assert_eq!(run.status.code(), Some(2));
    assert_eq!(json(&run.stdout)["error"]["errors"][0]["kind"], "SyntaxError");
}

#[test]
fn overflowing_orbit_is_a_numerical_refusal() {
    let dir = TempDir::new().unwrap();
    let problem = write(
        &dir,
        "x.json",
        r#"{"matrix": [[1]], "point": [1], "tGrid": {"start": 0, "end": 5000, "count": 3}}"#,
    );
    let run = dilind(&["export-orbit", &problem]);
    assert_eq!(run.status.code(), Some(3));
    let err = json(&run.stdout);
    assert_eq!(err["error"]["tag"], "OverflowRisk");
    assert_eq!(err["error"]["module"], "cli-io");
}

#[test]
fn unreadable_input_fails_with_an_error_object() {
    let run = dilind(&["analyze", "/nonexistent/problem.json"]);
    assert_eq!(run.status.code(), Some(1));
    assert_eq!(json(&run.stdout)["error"]["tag"], "Io");
}

#[test]
fn error_kinds_map_to_exit_statuses() {
    let err = |error| CommandError { error, module: "m", operation: "o" };
    assert_eq!(err(Error::InvalidInput("x".into())).exit_code(), 2);
    assert_eq!(err(Error::OverflowRisk { exponent: 1e3 }).exit_code(), 3);
    let violation = err(Error::PropertyViolation {
        property: "p".into(),
        point: vec![0.0],
        time: 0.0,
        residual: 1.0,
    });
    assert_eq!(violation.exit_code(), 4);
    assert_eq!(violation.to_json()["error"]["tag"], "PropertyViolation");
}
