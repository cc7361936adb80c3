use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ticlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ticlab"))
        .args(args)
        .env_remove("TICLAB_OUTPUT_DIR")
        .output()
        .expect("spawn ticlab")
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/report.schema.json");
    let text = std::fs::read_to_string(path).expect("schema file");
    jsonschema::draft202012::new(&serde_json::from_str(&text).expect("schema JSON")).expect("valid schema")
}

fn report(args: &[&str], expected_exit: i32) -> Value {
    let out = ticlab(args);
    assert_eq!(out.status.code(), Some(expected_exit), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let value: Value = serde_json::from_slice(&out.stdout).expect("JSON report");
    let validator = schema();
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{args:?} violates schema: {errors:?}");
    assert_eq!(value["exit_code"], expected_exit);
    value
}

#[test]
fn example1_passes_and_tamper_fails() {
    let ok = report(&["--depth", "6", "--grid-depth", "4", "reproduce-example1"], 0);
    assert_eq!(ok["report"]["dominance"]["verdict"], "DOMINATES");
    assert_eq!(ok["report"]["closed_form_table"][0]["j_hat"], "-1/32");
    assert_eq!(ok["report"]["closed_form_table"][0]["j_hat_decimal"], "-0.031250000000");

    let bad = report(&["--depth", "6", "--grid-depth", "4", "reproduce-example1", "--tamper"], 2);
    assert_eq!(bad["passed"], false);
    assert_eq!(bad["report"]["dominance"]["verdict"], "FAILS");
}

#[test]
fn example2_row_at_double_horizon() {
    let v = report(&["--grid-depth", "2", "reproduce-example2", "--horizon", "2"], 0);
    let rows = v["report"]["table"]["rows"].as_array().expect("rows");
    assert_eq!(rows[0]["t"], "0/1");
    assert_eq!(rows[0]["j_naive"], "4/1");
    assert_eq!(rows[0]["j_dominating"], "10/3");
    assert_eq!(rows[0]["ratio"], "5/6");
    let one = rows.iter().find(|r| r["t"] == "1/1").expect("row at t = 1");
    assert_eq!(one["j_naive"], "1/1");
    assert_eq!(one["j_dominating"], "5/6");
}

#[test]
fn invalid_configuration_exits_one() {
    for args in [
        &["--depth", "1", "reproduce-example1"][..],
        &["--tol", "-1/2", "verify"],
        &["--tol", "abc", "verify"],
        &["reproduce-example2", "--horizon", "0"],
        &["no-such-command"],
        &["verify-equilibrium", "--control", "/nonexistent/control.json"],
    ] {
        let out = ticlab(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?} wrote a report");
    }
}

#[test]
fn equilibrium_exit_codes_follow_verdict() {
    let zero = report(&["--grid-depth", "3", "verify-equilibrium"], 0);
    assert_eq!(zero["report"]["equilibrium"]["verdict"], "PASS");
    let hat = report(&["--grid-depth", "3", "verify-equilibrium", "--control", "alpha-hat"], 2);
    let first = &hat["report"]["equilibrium"]["witnesses"][0];
    assert_eq!(first["t"], "0/1");
    let rate: f64 = first["rate_decimal"].as_str().expect("decimal").parse().expect("number");
    assert!((rate + 1.0).abs() < 1e-3, "rate {rate}");
}

#[test]
fn control_file_is_accepted() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("control.json");
    std::fs::write(&path, r#"{"bound":"1","segments":[{"start":"0","c0":"0","c1":"0"}],"tail":null}"#)
        .expect("write");
    let v =
        report(&["--grid-depth", "2", "verify-equilibrium", "--control", path.to_str().expect("utf8")], 0);
    assert_eq!(v["report"]["equilibrium"]["verdict"], "PASS");
}

#[test]
fn optimize_is_deterministic() {
    let args = ["--depth", "5", "--seed", "7", "optimize", "--restarts", "3", "--iterations", "50"];
    let a = ticlab(&args);
    let b = ticlab(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = report(&args, a.status.code().expect("exit code"));
    assert_eq!(v["report"]["N"], 5);
    // Nodes at every t_n and s_n below the truncation.
    assert_eq!(v["report"]["path"].as_array().expect("path").len(), 11);
}

#[test]
fn shallow_zero_start_misses_the_target() {
    let v = report(&["--depth", "2", "optimize", "--zero-start-only", "--iterations", "0"], 2);
    assert_eq!(v["report"]["best_value"], "0/1");
    assert!(v["report"]["witness"].is_null());
}

#[test]
fn csv_headers() {
    let out = ticlab(&["--format", "csv", "--depth", "4", "--grid-depth", "2", "reproduce-example1"]);
    let text = String::from_utf8(out.stdout).expect("utf8");
    assert!(text.starts_with("n,t,J_hat,closed_form,J_star,margin,t_exact,"), "{text}");
    assert_eq!(text.lines().count(), 1 + 5);

    let out = ticlab(&["--format", "csv", "--grid-depth", "2", "reproduce-example2"]);
    let text = String::from_utf8(out.stdout).expect("utf8");
    assert!(text.starts_with("t,J_naive,J_dominating,margin,ratio"), "{text}");

    let out =
        ticlab(&["--format", "csv", "--depth", "4", "optimize", "--restarts", "1", "--iterations", "20"]);
    let text = String::from_utf8(out.stdout).expect("utf8");
    assert!(text.starts_with("u,x,u_exact,x_exact\n"), "{text}");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = Command::new(env!("CARGO_BIN_EXE_ticlab"))
        .args(["--grid-depth", "2", "reproduce-example2"])
        .env("TICLAB_OUTPUT_DIR", dir.path())
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(dir.path().join("reproduce-example2.json")).expect("report file");
    let v: Value = serde_json::from_str(&written).expect("JSON");
    assert_eq!(v["command"], "reproduce-example2");

    let explicit = dir.path().join("nested/out.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_ticlab"))
        .args(["--format", "csv", "--grid-depth", "2", "--output"])
        .arg(&explicit)
        .arg("reproduce-example2")
        .env("TICLAB_OUTPUT_DIR", dir.path())
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(&explicit).expect("csv").starts_with("t,J_naive"));
}
