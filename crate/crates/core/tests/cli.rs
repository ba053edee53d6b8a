use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-unary"))
}

fn run(args: &[&str]) -> (Option<i32>, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn eval_exit_code_is_truth() {
    assert_eq!(run(&["eval", "--builtin", "B", "--bits", "100"]).0, Some(0));
    assert_eq!(run(&["eval", "--builtin", "B", "--bits", "010"]).0, Some(1));
    assert_eq!(run(&["eval", "--sentence", "exists x.", "--bits", "1"]).0, Some(2));
    assert_eq!(run(&["eval", "--builtin", "A_2", "--bits", "1001", "--circular"]).0, Some(0));
}

#[test]
fn randomized_commands_need_a_seed() {
    let (code, _) = run(&["simulate", "--builtin", "A", "--n", "10", "--p", "0.5", "--trials", "3"]);
    assert_ne!(code, Some(0));
}

#[test]
fn simulate_is_reproducible_csv() {
    let args = ["simulate", "--builtin", "A_2", "--n", "1000", "--alpha", "0.5", "--trials", "200", "--seed", "7"];
    let (code, a) = run(&args);
    assert_eq!(code, Some(0));
    assert_eq!(a, run(&args).1);
    let mut lines = a.lines();
    assert!(lines.next().unwrap().starts_with("label,n,alpha,p,sentence"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn sweep_preset_grid() {
    let (code, out) = run(&["sweep", "--preset", "theorem1", "--k", "2", "--n", "2000", "--trials", "20", "--seed", "7"]);
    assert_eq!(code, Some(0));
    // Seven categories, three sentences each, plus the header.
    assert_eq!(out.lines().count(), 1 + 7 * 3);
}

#[test]
fn monoid_export_and_json() {
    let (code, out) = run(&["monoid", "--t", "1"]);
    assert_eq!(code, Some(0));
    assert!(out.starts_with("# type monoid v1"));
    let (_, json) = run(&["--json", "decompose", "--t", "2", "--level", "1", "--bits", "0010000000001"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["intervals"].as_array().unwrap().len(), 2);
    assert_eq!(v["intervals"][1]["value"], "b");
}
