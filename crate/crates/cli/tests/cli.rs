use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn radopf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radopf")).args(args).env_remove("RADOPF_JOBS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn ieee33() -> String {
    data("ieee33.json").display().to_string()
}

#[test]
fn validate_json_and_csv_pair() {
    let o = radopf(&["validate", &ieee33()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("ok: 32 nodes"));
    let nodes = data("ieee33_nodes.csv").display().to_string();
    let branches = data("ieee33_branches.csv").display().to_string();
    assert_eq!(code(&radopf(&["validate", &nodes, "--branches", &branches])), 1);
    assert_eq!(code(&radopf(&["validate", &nodes, "--branches", &branches, "--v0", "1.0"])), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&radopf(&["validate", "/no/such/file.json"])), 3);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"v0": 1.0, "nodes": [], "branches": [{"child": "a", "parent": "b", "r": 1, "x": 1, "l_max": 1}]}"#).unwrap();
    assert_eq!(code(&radopf(&["validate", bad.to_str().unwrap()])), 1);
    assert_eq!(code(&radopf(&["modify", &ieee33(), "--condition", "c9", "-o", "x.json"])), 1);
    let out = radopf(&["modify", &ieee33(), "--condition", "c1", "-o", "/no/such/dir/out.json"]);
    assert_eq!(code(&out), 3);
    assert_eq!(code(&radopf(&["--help"])), 0);
}

#[test]
fn infeasible_solve_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("tight.json");
    std::fs::write(
        &net,
        r#"{"v0": 1.0,
            "nodes": [{"id": "a", "v_min": 0.9, "v_max": 1.1, "p_min": -1, "p_max": -1, "q_min": 0, "q_max": 0}],
            "branches": [{"child": "a", "parent": "root", "r": 0.01, "x": 0.01, "l_max": 0.01}]}"#,
    )
    .unwrap();
    let o = radopf(&["solve", net.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["status"], "primal_infeasible");
}

#[test]
fn check_modify_certify() {
    let o = radopf(&["check", &ieee33()]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["c1"]["holds"], false);
    let o = radopf(&["certify", &ieee33()]);
    assert_eq!(json(&o)["verdict"], "conditions_not_met");

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c3.json");
    let o = radopf(&["modify", &ieee33(), "--condition", "c3", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(!json(&o).as_array().unwrap().is_empty());
    let o = radopf(&["certify", out.to_str().unwrap(), "--condition", "c3"]);
    let cert = json(&o);
    assert_eq!(cert["verdict"], "conditions_met");
    assert_eq!(cert["condition"], "c3");
    assert!(cert["certificate"]["mu"].as_f64().unwrap() >= 10.0);
}

#[test]
fn solve_with_dual_and_linear_objective() {
    let o = radopf(&["solve", &ieee33(), "--dual"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["status"], "optimal");
    let loss = r["objective"].as_f64().unwrap();
    assert!(r["dual"]["rel_gap"].as_f64().unwrap().abs() < 1e-6);
    assert_eq!(r["point"]["v"].as_array().unwrap().len(), 33);

    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("obj.json");
    std::fs::write(&obj, r#"{"p": {"1": 1.0}}"#).unwrap();
    let o = radopf(&["solve", &ieee33(), "--objective", &format!("linear:{}", obj.display())]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["objective_kind"], "linear");
    // the cheapest import is the 3.715 MW demand plus the minimum loss
    assert!((r["objective"].as_f64().unwrap() - (0.3715 + loss)).abs() < 1e-6);
    assert_eq!(code(&radopf(&["solve", &ieee33(), "--objective", "cost"])), 1);
}

#[test]
fn gap_study_formats_and_jobs() {
    let args = ["gap-study", &ieee33(), "--instances", "6", "--seed", "5", "--modify", "c1", "--format", "csv"];
    let one = stdout(&radopf(&[&args[..], &["--jobs", "1"]].concat()));
    assert_eq!(one.lines().count(), 7);
    let env = Command::new(env!("CARGO_BIN_EXE_radopf")).args(args).env("RADOPF_JOBS", "3").output().unwrap();
    assert_eq!(stdout(&env), one);
    // the flag wins over a bad environment value
    let o = Command::new(env!("CARGO_BIN_EXE_radopf"))
        .args(args)
        .args(["--jobs", "2"])
        .env("RADOPF_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), one);

    let table = stdout(&radopf(&["gap-study", &ieee33(), "--instances", "4", "--modify", "c2"]));
    assert!(table.contains("100.0%"), "{table}");
    let o = radopf(&["gap-study", &ieee33(), "--instances", "3", "--format", "json"]);
    assert_eq!(json(&o)["summary"]["total"], 3);
}
