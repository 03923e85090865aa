use std::path::Path;
use std::process::Command;

use centroflat_cli::{main_with_args, run, Report, RunSpec, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, Report) {
    let mut out = Vec::new();
    let mut full = vec!["centroflat"];
    full.extend_from_slice(args);
    let code = main_with_args(full, &mut out);
    (code, serde_json::from_slice(&out).expect("report json"))
}

fn spec(json: &str) -> RunSpec {
    serde_json::from_str(json).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_passes_on_table_solution() {
    let (code, r) = call(&["verify", "--solution", "table1_f", "--grid", "33", "--no-timestamp"]);
    assert_eq!(code, EXIT_PASS);
    assert!(r.passed);
    assert!(r.timestamp.is_none());
    assert!(r.checks.iter().any(|c| c.name == "associativity"));
}

#[test]
fn verify_fails_on_zero_potential() {
    let (code, r) = call(&["verify", "--solution", "zero_potential", "--grid", "17"]);
    assert_eq!(code, EXIT_FAIL);
    assert!(!r.passed);
    assert!(r.timestamp.is_some());
}

#[test]
fn unknown_solution_is_usage_error() {
    let (code, r) = call(&["verify", "--solution", "no_such_thing"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(r.error.is_some());
}

#[test]
fn bad_flags_are_usage_errors() {
    let mut out = Vec::new();
    assert_eq!(main_with_args(["centroflat", "verify", "--domain", "0,1,2"], &mut out), EXIT_USAGE);
    assert_eq!(main_with_args(["centroflat", "verify", "--tol", "oops"], &mut out), EXIT_USAGE);
    assert_eq!(main_with_args(["centroflat", "frobnicate"], &mut out), EXIT_USAGE);
    assert!(out.is_empty());
}

#[test]
fn negative_domain_and_params_parse() {
    let (code, r) = call(&[
        "verify",
        "--solution",
        "ansatz1",
        "--param",
        "alpha=1",
        "--param",
        "gamma=1.2",
        "--domain",
        "-0.3,0.3,0.5,2",
        "--grid",
        "21,25",
    ]);
    assert_eq!(code, EXIT_PASS, "{:?}", r.error);
    assert_eq!(r.spec.domain, Some([-0.3, 0.3, 0.5, 2.0]));
    assert_eq!(r.spec.grid, Some([21, 25]));
    assert_eq!(r.spec.solution.unwrap().params["gamma"], 1.2);
}

#[test]
fn spec_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    std::fs::write(&file, r#"{"command": "verify", "solution": {"id": "table2_f"}, "grid": [17, 17], "tolerances": {"residual": -1}}"#).unwrap();
    let (code, _) = call(&["run", "--spec", path_str(&file)]);
    assert_eq!(code, EXIT_FAIL);
    let (code, r) = call(&["run", "--spec", path_str(&file), "--tol", "residual=1e-9"]);
    assert_eq!(code, EXIT_PASS, "{:?}", r.checks);
    assert_eq!(r.command, "verify");
}

#[test]
fn spec_file_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    std::fs::write(&file, r#"{"command": "verify", "colour": "red"}"#).unwrap();
    let mut out = Vec::new();
    assert_eq!(main_with_args(["centroflat", "run", "--spec", path_str(&file)], &mut out), EXIT_USAGE);
}

#[test]
fn list_names_every_solution() {
    let (code, r) = call(&["list"]);
    assert_eq!(code, EXIT_PASS);
    let text = r.data.to_string();
    for id in ["table1_f", "table6_F", "trivial_cubic", "rarefaction", "revolution", "zero_potential"] {
        assert!(text.contains(id), "{id} missing");
    }
}

#[test]
fn reconstruct_writes_obj_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("s.obj");
    let rep = dir.path().join("r.json");
    let (code, r) = call(&[
        "reconstruct",
        "--solution",
        "trivial_cubic",
        "--grid",
        "17",
        "--output",
        &format!("obj={}", path_str(&obj)),
        "--report",
        path_str(&rep),
    ]);
    assert_eq!(code, EXIT_PASS, "{:?}", r.error);
    let text = std::fs::read_to_string(&obj).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 17 * 17);
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 2 * 16 * 16);
    assert_eq!(r.outputs_written, vec![path_str(&obj).to_string()]);
    let saved: Report = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(saved, r);
}

#[test]
fn sweep_lambda_scales_metric() {
    let dir = tempfile::tempdir().unwrap();
    let (code, r) = call(&[
        "sweep-lambda",
        "--solution",
        "trivial_cubic",
        "--lambda",
        "-1,1,2",
        "--output",
        &format!("obj_dir={}", path_str(dir.path())),
    ]);
    assert_eq!(code, EXIT_PASS, "{:?}", r.checks);
    assert_eq!(r.checks.len(), 3);
    assert_eq!(r.outputs_written.len(), 3);
}

#[test]
fn report_command_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let bad = dir.path().join("bad.json");
    call(&["verify", "--solution", "table1_f", "--grid", "17", "--report", path_str(&good)]);
    call(&["verify", "--solution", "zero_potential", "--grid", "17", "--report", path_str(&bad)]);
    let (code, _) = call(&["report", "--input", path_str(&good)]);
    assert_eq!(code, EXIT_PASS);
    let (code, r) = call(&["report", "--input", path_str(&good), "--input", path_str(&bad)]);
    assert_eq!(code, EXIT_FAIL);
    assert_eq!(r.checks.iter().filter(|c| !c.passed).count(), 1);
}

#[test]
fn other_commands_pass_on_small_inputs() {
    let cases = [
        r#"{"command": "invariants", "solution": {"id": "table1_f"}, "grid": [33, 33]}"#,
        r#"{"command": "web", "solution": {"id": "trivial_cubic"}, "grid": [33, 33]}"#,
        r#"{"command": "transform", "solution": {"id": "table2_F"}}"#,
        r#"{"command": "transform", "solution": {"id": "table1_f"}}"#,
        r#"{"command": "chain", "solution": {"id": "rarefaction"}, "domain": [0, 1, 0, 1], "grid": [65, 65]}"#,
        r#"{"command": "hydro", "solution": {"id": "rarefaction_exp"}, "grid": [65, 5], "settings": {"levels": 3}}"#,
    ];
    for c in cases {
        let (code, r) = run(&spec(c), false);
        assert_eq!(code, EXIT_PASS, "{c}: {:?} {:?}", r.error, r.checks);
    }
}

#[test]
fn chain_refuses_complex_roots() {
    let (code, r) = run(&spec(r#"{"command": "chain", "solution": {"id": "trivial_cubic"}, "grid": [33, 33]}"#), false);
    assert_eq!(code, EXIT_FAIL);
    assert!(r.error.is_some());
}

#[test]
fn binary_exit_codes_and_determinism() {
    let bin = env!("CARGO_BIN_EXE_centroflat");
    let go = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let a = go(&["verify", "--solution", "table3_f", "--grid", "17", "--seed", "3", "--no-timestamp"]);
    let b = go(&["verify", "--solution", "table3_f", "--grid", "17", "--seed", "3", "--no-timestamp"]);
    assert_eq!(a.status.code(), Some(EXIT_PASS));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(go(&["verify", "--solution", "zero_potential"]).status.code(), Some(EXIT_FAIL));
    assert_eq!(go(&["verify", "--solution", "nope"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(go(&["--help"]).status.code(), Some(EXIT_PASS));
}

#[test]
fn hydro_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("h.json");
    let conv = dir.path().join("conv.csv");
    let (code, r) = call(&[
        "hydro",
        "--solution",
        "rarefaction_exp",
        "--grid",
        "65,5",
        "--set",
        "levels=3",
        "--tol",
        "error=1e-5",
        "--output",
        &format!("convergence_csv={}", path_str(&conv)),
        "--report",
        path_str(&rep),
    ]);
    assert_eq!(code, EXIT_PASS, "{:?}", r.checks);
    assert_eq!(r.checks.len(), 2);
    assert_eq!(std::fs::read_to_string(&conv).unwrap().lines().count(), 4);
    let saved: Report = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(saved.checks, r.checks);
}
