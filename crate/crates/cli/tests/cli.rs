use std::path::Path;
use std::process::{Command, Output};

fn inexact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inexact")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

#[test]
fn eval_prints_the_function_value() {
    assert_eq!(stdout(&inexact(&["eval", "--problem", "be", "--n", "3", "--bits", "101"])), "5\n");
    assert_eq!(stdout(&inexact(&["eval", "--problem", "ue", "--n", "3", "--bits", "011"])), "2\n");
    assert_eq!(stdout(&inexact(&["eval", "--problem", "or", "--n", "3", "--bits", "000"])), "0\n");
}

#[test]
fn eval_without_bits_prints_the_truth_table() {
    let text = stdout(&inexact(&["eval", "--problem", "ue", "--n", "2"]));
    assert_eq!(text, "b_1,b_0,output\n0,0,0\n0,1,1\n1,0,1\n1,1,2\n");
}

#[test]
fn curve_at_zero_volts_is_a_coin_flip() {
    let text = stdout(&inexact(&["curve", "--sigma", "1", "--vdd", "0"]));
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# inexact "));
    assert_eq!(lines[1..], ["vdd,sigma,p", "0.0,1.0,0.5"]);
}

#[test]
fn or_mobs_is_one() {
    let doc = json(&inexact(&["mobs", "--problem", "or", "--n", "4", "--mode", "exact"]));
    assert_eq!(doc["command"], "mobs");
    assert_eq!(doc["config"]["seed"], 0);
    let mobs = doc["result"]["mobs"].as_f64().unwrap();
    assert!((mobs - 1.0).abs() < 1e-9, "{mobs}");
}

#[test]
fn simulate_reports_every_row() {
    let doc = json(&inexact(&["simulate", "--problem", "or", "--n", "2", "--energies", "1,1"]));
    let per_input = doc["result"]["report"]["per_input"].as_array().unwrap();
    assert_eq!(per_input.len(), 4);
    // row 0 fails unless neither bit flips: 1 - (1/2)^2
    assert_eq!(per_input[0]["p_err"], 0.75);
    assert_eq!(doc["result"]["report"]["setting"], "clairvoyant");
}

#[test]
fn simulate_monte_carlo_carries_standard_errors() {
    let doc = json(&inexact(&[
        "simulate", "--problem", "ue", "--n", "3", "--budget", "3", "--mode", "monte-carlo", "--samples", "2000",
        "--seed", "5", "--group", "full-symmetric",
    ]));
    assert_eq!(doc["config"]["samples"], 2000);
    for row in doc["result"]["report"]["per_input"].as_array().unwrap() {
        assert!(row["std_err"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn outputs_embed_digest_and_version() {
    let doc = json(&inexact(&["curve", "--format", "json", "--vdd", "1"]));
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["config_sha256"].as_str().unwrap().len(), 64);
}

fn run_to_file(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let path_str = path.to_str().unwrap().to_string();
    full.extend(["--output", &path_str]);
    let out = inexact(&full);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(path).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--problem", "be", "--n", "4", "--budget", "6", "--mode", "monte-carlo", "--samples", "5000",
        "--seed", "11", "--group", "full-symmetric", "--decoder", "map",
    ];
    let a = run_to_file(dir.path(), "a.json", &args);
    let b = run_to_file(dir.path(), "b.json", &args);
    assert_eq!(a, b);
    let mut other = args.to_vec();
    other[12] = "12";
    assert_ne!(a, run_to_file(dir.path(), "c.json", &other));
}

#[test]
fn config_file_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "seed = 3\nbudgets = [4.0, 8.0]\nmode = \"exact\"\n\n[problem]\nkind = \"be\"\nn = 3\n\n[metric]\nkind = \"reciprocal_expected_error\"\n",
    )
    .unwrap();
    let from_file = json(&inexact(&["mobs", "--config", config.to_str().unwrap()]));
    let from_flags = json(&inexact(&[
        "mobs", "--problem", "be", "--n", "3", "--budgets", "4,8", "--mode", "exact", "--seed", "3", "--metric",
        "expected-error",
    ]));
    assert_eq!(from_file, from_flags);
    // flags override the file field by field
    let overridden = json(&inexact(&["mobs", "--config", config.to_str().unwrap(), "--n", "2"]));
    assert_eq!(overridden["config"]["problem"]["n"], 2);
    assert_eq!(overridden["config"]["seed"], 3);
}

#[test]
fn exit_codes() {
    assert_eq!(inexact(&["bogus"]).status.code(), Some(2));
    assert_eq!(inexact(&["eval", "--problem", "be"]).status.code(), Some(2));
    assert_eq!(inexact(&["eval", "--problem", "be", "--n", "3", "--bits", "10"]).status.code(), Some(2));
    assert_eq!(inexact(&["eval", "--problem", "or", "--n", "30"]).status.code(), Some(3));
    let capped = inexact(&[
        "allocate", "--problem", "be", "--n", "3", "--budget", "6", "--metric", "expected-error", "--allocation",
        "staircase", "--max-iterations", "1",
    ]);
    assert_eq!(capped.status.code(), Some(4));
    let doc: serde_json::Value = serde_json::from_slice(&capped.stdout).unwrap();
    assert_eq!(doc["result"]["allocation"]["converged"], false);
    let mismatch = inexact(&["mobs", "--problem", "or", "--n", "2", "--metric", "comparison"]);
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("metric mismatch"));
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "sed = 4\n").unwrap();
    let out = inexact(&["curve", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn allocate_finds_uniform_for_or() {
    let doc = json(&inexact(&["allocate", "--problem", "or", "--n", "3", "--budget", "6"]));
    for e in doc["result"]["allocation"]["evec"].as_array().unwrap() {
        assert!((e.as_f64().unwrap() - 2.0).abs() < 0.05);
    }
}
