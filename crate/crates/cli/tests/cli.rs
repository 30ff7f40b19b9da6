use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn privlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privlab")).args(args).env_remove("PRIVLAB_SEED").output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad JSON ({e}): {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn write_temp(name: &str, v: &Value) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("privlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(v).unwrap()).unwrap();
    path
}

fn rr_file() -> PathBuf {
    let e = std::f64::consts::E;
    let k = e / (1.0 + e);
    write_temp(
        "rr.json",
        &json!({ "domain_size": 2, "sample_size": 1, "output_size": 2, "rows": [[k, 1.0 - k], [1.0 - k, k]] }),
    )
}

/// `M(a, b) = {a, b}` on a domain of `x` elements.
fn set_leak_file(x: usize) -> PathBuf {
    let mut rows = Vec::new();
    for a in 0..x {
        for b in 0..x {
            let mut r = vec![0.0; x * x];
            r[a.min(b) * x + a.max(b)] = 1.0;
            rows.push(r);
        }
    }
    write_temp(
        &format!("leak{x}.json"),
        &json!({ "domain_size": x, "sample_size": 2, "output_size": x * x, "rows": rows }),
    )
}

#[test]
fn dp_check_randomized_response_passes() {
    let f = rr_file();
    let out = privlab(&["dp-check", "--mechanism", f.to_str().unwrap(), "--eps", "1", "--delta", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["pass"], json!(true));
    assert_eq!(v["config"]["command"], json!("dp-check"));
}

#[test]
fn dp_check_identity_fails_with_witness() {
    let f = write_temp(
        "id.json",
        &json!({ "domain_size": 2, "sample_size": 1, "output_size": 2, "rows": [[1.0, 0.0], [0.0, 1.0]] }),
    );
    let out = privlab(&["dp-check", "--mechanism", f.to_str().unwrap(), "--eps", "1", "--delta", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_of(&out);
    assert!(v["report"]["witness"].is_object());
    assert!((v["report"]["delta"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn dp_check_missing_file_is_usage_error() {
    let out = privlab(&["dp-check", "--mechanism", "/nonexistent/mech.json", "--eps", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dp_check_malformed_file_is_usage_error() {
    let f = write_temp("bad.json", &json!({ "domain_size": 2, "rows": [] }));
    let out = privlab(&["dp-check", "--mechanism", f.to_str().unwrap(), "--eps", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(privlab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn compose_strong_single_step() {
    let out = privlab(&["compose", "--rule", "strong", "--eps", "0.1", "--delta", "1e-6", "--ell", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let eps = v["report"]["epsilon"].as_f64().unwrap();
    // ε·√(ℓ ln(1/(ℓδ))) + ℓε(e^ε − 1) at ℓ = 1
    let expected = 0.1 * 1e6f64.ln().sqrt() + 0.1 * (0.1f64.exp() - 1.0);
    assert!((eps - expected).abs() < 1e-12, "{eps} vs {expected}");
    assert!((eps - 0.38226).abs() < 1e-3);
}

#[test]
fn compose_subsample_needs_sizes() {
    let out = privlab(&["compose", "--rule", "subsample", "--eps", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = privlab(&["compose", "--rule", "subsample", "--eps", "1", "--n", "1", "--m", "4"]);
    let v = json_of(&out);
    let expected = (1.0 + 4.0 / 16.0 * (1f64.exp() - 1.0)).ln();
    assert!((v["report"]["epsilon"].as_f64().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn walk_passes_chi_square() {
    let out = privlab(&["walk", "--domain", "6", "--m", "2", "--d", "1", "--trials", "100000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["report"]["endpoint_disjoint_rate"], json!(1.0));
    assert_eq!(v["config"]["trials"], json!(100000));
    let alias = privlab(&["walk-verify", "--domain", "6", "--m", "2", "--d", "1", "--trials", "100000"]);
    assert_eq!(alias.stdout, out.stdout);
}

#[test]
fn axioms_are_byte_identical_across_runs() {
    let a = privlab(&["axioms", "--seed", "7"]);
    let b = Command::new(env!("CARGO_BIN_EXE_privlab")).args(["axioms"]).env("PRIVLAB_SEED", "7").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json_of(&a);
    assert_eq!(v["report"]["matches_golden"], json!(true));
    assert_eq!(v["config"]["seed"], json!(7));
}

#[test]
fn env_seed_is_embedded() {
    let out = Command::new(env!("CARGO_BIN_EXE_privlab"))
        .args(["compose", "--rule", "basic", "--eps", "1", "--ell", "3"])
        .env("PRIVLAB_SEED", "11")
        .output()
        .unwrap();
    let v = json_of(&out);
    assert_eq!(v["config"]["seed"], json!(11));
    assert!((v["report"]["epsilon"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn attack_enforces_entropy_floor_unless_relaxed() {
    let f = set_leak_file(20);
    let path = f.to_str().unwrap();
    assert_eq!(privlab(&["attack", "--mechanism", path, "--n", "2"]).status.code(), Some(2));
    let out = privlab(&["attack", "--mechanism", path, "--n", "2", "--relax-entropy", "--trials", "40"]);
    // The set-leaking mechanism is blatantly non-private.
    assert_eq!(out.status.code(), Some(1));
    let v = json_of(&out);
    assert_eq!(v["config"]["relax_entropy"], json!(true));
    assert_eq!(v["report"]["blatant"], json!(true));
}

#[test]
fn select_reports_outcome_and_law() {
    let f = write_temp("counts.json", &json!([10, 165, 25]));
    let out = privlab(&["select", "--counts", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["report"]["outcome"], json!(1));
    let law: Vec<f64> = serde_json::from_value(v["report"]["law"].clone()).unwrap();
    assert_eq!(law.len(), 4);
    assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    for algo in ["dp-select", "rdp-select"] {
        let out = privlab(&["select", "--counts", f.to_str().unwrap(), "--algo", algo]);
        assert_eq!(out.status.code(), Some(0), "{algo}");
    }
}

#[test]
fn rep2dp_heavy_coin() {
    let out = privlab(&["rep2dp", "--trials", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["report"]["sources"].as_array().unwrap().len(), 2);
    assert!(v["report"]["k"].as_u64().unwrap() >= 1);
}

#[test]
fn stability_reports_base_and_stabilized() {
    let f = set_leak_file(3);
    let out = privlab(&["stability", "--mechanism", f.to_str().unwrap(), "--m-override", "5000", "--rho", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["report"]["base"]["mode"], json!("exact"));
    assert_eq!(v["report"]["stabilizer"]["below_bound"], json!(true));
    let base = v["report"]["base"]["value"].as_f64().unwrap();
    let stabilized = v["report"]["stabilized"]["value"].as_f64().unwrap();
    assert!(stabilized < base);
}

#[test]
fn output_flag_writes_report() {
    let dir = std::env::temp_dir().join(format!("privlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("compose.json");
    let out = privlab(&["compose", "--rule", "basic", "--eps", "0.5", "--ell", "2", "--output", path.to_str().unwrap()]);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written, json_of(&out));
}
