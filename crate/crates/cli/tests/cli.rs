use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn usd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn gen(dir: &Path, name: &str, spec: &str) -> String {
    let file = path(dir, name);
    let o = usd(&["gen", "--spec", spec, "-o", &file]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    file
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn equal_overlap_gen_then_optimize() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "eo.json", r#"{"family":"equal-overlap","n":4,"s":0.25}"#);
    let o = usd(&["optimize", &f]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json_out(&o);
    assert!((doc["result"]["p_m"].as_f64().unwrap() - 0.75).abs() < 1e-6);
    assert_eq!(doc["command"], "optimize");
    assert_eq!(doc["tool"], "usd");
    assert!(doc["version"].is_string());
    assert!(doc["config"]["optimizer"].is_object());
    assert_eq!(doc["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn three_state_example_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "sub.json", r#"{"family":"three-sub","lambda3_sq":1.5}"#);
    let o = usd(&["optimize", &f, "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json_out(&o);
    let r = &doc["result"];
    assert!((r["p_m"].as_f64().unwrap() - 0.535).abs() < 1e-3);
    assert_eq!(doc["seed"], 3);
    // Angles carry at most 12 significant digits.
    for a in r["t_m"].as_array().unwrap() {
        let v = a.as_f64().unwrap();
        assert_eq!(v, format!("{v:.11e}").parse::<f64>().unwrap());
    }
    assert!(r["residuals"]["chefles"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn identity_states_are_perfectly_distinguishable() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "id.json",
        r#"{"n":2,"states":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#,
    );
    let o = usd(&["optimize", &f]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!((json_out(&o)["result"]["p_m"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn rank_deficient_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "dep.json",
        r#"{"n":2,"states":[[[1,0],[0,0]],[[1,0],[0,0]]]}"#,
    );
    let o = usd(&["optimize", &f]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn parse_errors_exit_1_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.json", "{\n  \"n\": 2,\n  \"states\": [[[1, 0]]] oops\n}");
    let o = usd(&["optimize", &f]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let f = write(dir.path(), "short.json", r#"{"n":2,"states":[[[1,0],[0,0]],[[0,0]]]}"#);
    let o = usd(&["optimize", &f]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("states[1]"), "{}", stderr(&o));

    let f = write(dir.path(), "norm.json", r#"{"n":2,"states":[[[2,0],[0,0]],[[0,0],[1,0]]]}"#);
    assert_eq!(code(&usd(&["optimize", &f])), 1);
    assert_eq!(code(&usd(&["optimize", &f, "--normalize"])), 0);
}

#[test]
fn priors_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "eo.json", r#"{"family":"equal-overlap","n":3,"s":0.2}"#);
    let o = usd(&["optimize", &f, "--priors", "0.5,0.5"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn family_domain_error_exits_5() {
    let o = usd(&["gen", "--spec", r#"{"family":"two-state","r":0.75}"#]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("1/sqrt(2)"), "{}", stderr(&o));
}

#[test]
fn non_convergence_exits_2_with_best_so_far() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "sub.json", r#"{"family":"three-sub","lambda3_sq":1.5}"#);
    let o = usd(&["optimize", &f, "--no-analytic", "--tol", "1e-300", "--restarts", "1"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let doc = json_out(&o);
    assert_eq!(doc["result"]["converged"], false);
    assert!((doc["result"]["p_m"].as_f64().unwrap() - 0.535).abs() < 1e-3);
}

#[test]
fn tensor_layout_needs_full_ancilla() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "sub.json", r#"{"family":"three-sub","lambda3_sq":1.5}"#);
    let o = usd(&["neumark", &f, "--tensor"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    let out = path(dir.path(), "nm.json");
    let o = usd(&["neumark", &f, "--tensor", "--shrink", "0.999", "-o", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let u = doc["result"]["unitary"].as_array().unwrap();
    assert_eq!(u.len(), 6);
    assert!(u.iter().all(|c| c.as_array().unwrap().len() == 6));
    assert!(doc["result"]["residuals"]["unitarity"].as_f64().unwrap() < 1e-10);
    assert_eq!(code(&usd(&["verify", &out])), 0);
}

#[test]
fn pipeline_documents_verify() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "eo.json", r#"{"family":"equal-overlap","n":3,"s":-0.2}"#);
    let opt = path(dir.path(), "opt.json");
    assert_eq!(code(&usd(&["optimize", &f, "-o", &opt])), 0);
    for cmd in ["povm", "neumark"] {
        let out = path(dir.path(), &format!("{cmd}.json"));
        let o = usd(&[cmd, &opt, "-o", &out]);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
        let v = usd(&["verify", &out]);
        assert_eq!(code(&v), 0, "{cmd}: {}", String::from_utf8_lossy(&v.stdout));
    }
    let sim = path(dir.path(), "sim.json");
    let o = usd(&["simulate", &opt, "--trials", "20000", "--workers", "3", "-o", &sim]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&usd(&["verify", &sim])), 0);
    assert_eq!(code(&usd(&["verify", &opt])), 0);
    assert_eq!(code(&usd(&["verify", &f])), 0);
}

#[test]
fn corrupted_povm_document_names_completeness() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "sub.json", r#"{"family":"three-sub","lambda3_sq":1.5}"#);
    let out = path(dir.path(), "povm.json");
    assert_eq!(code(&usd(&["povm", &f, "-o", &out])), 0);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let entry = &mut doc["result"]["detectors"][1][1][1][0];
    *entry = Value::from(entry.as_f64().unwrap() + 1e-3);
    std::fs::write(&out, serde_json::to_string(&doc).unwrap()).unwrap();
    let o = usd(&["verify", &out]);
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("completeness"), "{}", stderr(&o));
}

#[test]
fn tampered_input_fails_digest() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "eo.json", r#"{"family":"equal-overlap","n":3,"s":0.3}"#);
    let out = path(dir.path(), "opt.json");
    assert_eq!(code(&usd(&["optimize", &f, "-o", &out])), 0);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    doc["input"]["known_pm"] = Value::from(0.5);
    std::fs::write(&out, serde_json::to_string(&doc).unwrap()).unwrap();
    let o = usd(&["verify", &out]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("input-digest"), "{}", stderr(&o));
}

#[test]
fn simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "eo.json", r#"{"family":"equal-overlap","n":4,"s":0.25}"#);
    let run = || usd(&["simulate", &f, "--trials", "50000", "--seed", "9", "--workers", "4"]);
    let (a, b) = (run(), run());
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let rep = &json_out(&a)["result"]["report"];
    assert_eq!(rep["workers"], 4);
    assert_eq!(rep["error_rate"], 0.0);
}

#[test]
fn dump_grid_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "eo.json", r#"{"family":"equal-overlap","n":3,"s":0.3}"#);
    let csv = path(dir.path(), "grid.csv");
    let o = usd(&["optimize", &f, "--grid", "5", "--dump-grid", &csv]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t1,t2,efficiency");
    assert_eq!(lines.len(), 1 + 5 * 5 + 1);
}

#[test]
fn gen_output_is_stable() {
    let spec = r#"{"family":"four-param","lambda_sq":[1.6,0.9,1.2,0.3]}"#;
    let a = usd(&["gen", "--spec", spec]);
    let b = usd(&["gen", "--spec", spec]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json_out(&a)["known_pm"], 0.3);
}
