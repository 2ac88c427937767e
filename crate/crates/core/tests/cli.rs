use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_markov-pade"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--out").arg(dir.join("out")).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

const TWO_POINT: &str = r#"{
    "measure": {"type": "discrete", "interval": [-1, 1], "points": [-1, 1], "masses": [0.5, 0.5]},
    "nodes": {"pattern": "list", "points": [[0, 1], [0, 2], [0, 3]]},
    "n_max": 3
}"#;

const CHEBYSHEV_20: &str = r#"{
    "measure": {"type": "weight", "interval": [-1, 1], "name": "chebyshev1", "quad_order": 200},
    "nodes": {"pattern": "vertical", "base": 1.0, "spacing": 0.25, "delta": 0.5},
    "n_max": 20,
    "eval_grid": {"circle": {"center": [0, 0], "radius": 3.0, "count": 12}}
}"#;

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn help_documents_generators() {
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for word in ["approx", "converge", "check", "pencil", "biorth", "oracle", "vertical", "arc"] {
        assert!(text.contains(word), "help lacks {word}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let o = bin().args(["check", "--only", "nonsense"]).output().unwrap();
    assert_eq!(code(&o), 1);
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn malformed_config_names_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"measure": {"type": "discrete", "interval": [-1, 1],
        "points": [0], "masses": [1]}, "nodes": {"pattern": "arc", "radius": 1, "delta": 0.1}, "n_max": "ten"}"#);
    let o = run(tmp.path(), &["approx", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("n_max"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn probe_on_support_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &CHEBYSHEV_20.replace(
        r#"{"circle": {"center": [0, 0], "radius": 3.0, "count": 12}}"#,
        r#"{"points": [[2, 1], [0.25, 0]]}"#,
    ));
    let o = run(tmp.path(), &["converge", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("eval_grid[1]"));
}

#[test]
fn two_point_approx_marks_termination() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "two.json", TWO_POINT);
    let o = run(tmp.path(), &["approx", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    let chain = read_json(tmp.path(), "chain.json");
    assert_eq!(chain["terminated"], Value::Bool(true));
    let steps = chain["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 2);
    assert!((steps[0]["a2"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(steps[1]["b"].as_f64().unwrap(), 0.0);
    let csv = fs::read_to_string(tmp.path().join("out/coefficients.csv")).unwrap();
    assert!(csv.starts_with("poly,j,k,coeff\n"));
}

#[test]
fn zero_steps_is_ok() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "two.json", &TWO_POINT.replace("\"n_max\": 3", "\"n_max\": 0"));
    let o = run(tmp.path(), &["approx", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    assert!(read_json(tmp.path(), "chain.json")["steps"].as_array().unwrap().is_empty());
}

#[test]
fn converge_table_decays_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "cheb.json", CHEBYSHEV_20);
    let o = run(tmp.path(), &["converge", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = fs::read(tmp.path().join("out/convergence.csv")).unwrap();
    let o = run(tmp.path(), &["converge", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    assert_eq!(first, fs::read(tmp.path().join("out/convergence.csv")).unwrap());

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,re_lambda,im_lambda,abs_error,bound,ms"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20 * 12);
    let err = |n: &str, k: usize| -> f64 {
        rows.iter().filter(|r| r[0] == n).nth(k).unwrap()[3].parse().unwrap()
    };
    for k in 0..12 {
        assert!(err("20", k) <= err("5", k) / 10.0);
    }
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() >= 0.0 && r[5].is_empty()));
    // 17 significant digits
    assert_eq!(rows[0][3].split('e').next().unwrap().len(), 18);
}

#[test]
fn timing_fills_the_ms_column() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "two.json", TWO_POINT);
    let o = run(tmp.path(), &["converge", "--config", &cfg, "--timing"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(tmp.path().join("out/convergence.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| !l.ends_with(',')));
    assert_eq!(read_json(tmp.path(), "convergence.json")["terminated_early"], Value::Bool(true));
}

#[test]
fn default_check_passes() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["check", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep = read_json(tmp.path(), "check.json");
    assert_eq!(rep["passed"], Value::Bool(true));
    assert_eq!(rep["seed"], Value::from(3));
    assert!(rep["node_order"].as_str().unwrap().starts_with("z0, conj z0"));
}

#[test]
fn tampered_chain_fails_check() {
    let tmp = TempDir::new().unwrap();
    let mut cfg: Value = serde_json::from_str(&markov_pade::cli::ExperimentConfig::default().to_json()).unwrap();
    cfg["tamper"] = serde_json::json!({"index": 3, "field": "a1", "delta": 1e-3});
    let path = write_config(tmp.path(), "tampered.json", &cfg.to_string());
    let o = run(tmp.path(), &["check", "--config", &path, "--only", "pencil"]);
    assert_eq!(code(&o), 4);
    let rep = read_json(tmp.path(), "check.json");
    let checks = rep["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["module"] == "pencil"));
    let ident = checks.iter().find(|c| c["name"] == "m_function_identity").unwrap();
    assert_eq!(ident["passed"], Value::Bool(false));
}

#[test]
fn two_point_pencil_spectrum() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "two.json", TWO_POINT);
    let o = run(tmp.path(), &["pencil", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let rep = read_json(tmp.path(), "pencil.json");
    let last = rep["sections"].as_array().unwrap().last().unwrap().clone();
    let eig: Vec<f64> = last["eigenvalues"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((eig[0] + 1.0).abs() < 1e-10 && (eig[1] - 1.0).abs() < 1e-10);
    assert!(last["j2_min_eigenvalue"].as_f64().unwrap() > 0.0);
}

#[test]
fn biorth_writes_gram() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["biorth"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(tmp.path(), "biorth.json");
    assert_eq!(rep["passed"], Value::Bool(true));
    assert_eq!(rep["h"].as_array().unwrap().len(), 10);
    let csv = fs::read_to_string(tmp.path().join("out/gram.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9 * 9);
}

#[test]
fn oracle_flag_writes_comparison() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["converge", "--oracle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(tmp.path().join("out/oracle.csv")).unwrap();
    assert!(csv.starts_with("n,re_lambda,im_lambda,re_rn,im_rn,re_oracle,im_oracle,abs_diff\n"));
    assert_eq!(read_json(tmp.path(), "oracle.json")["passed"], Value::Bool(true));
}

#[test]
fn oracle_reports_rank_deficiency() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "v.json", &CHEBYSHEV_20.replace("\"n_max\": 20", "\"n_max\": 6"));
    let o = run(tmp.path(), &["oracle", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    let rep = read_json(tmp.path(), "oracle.json");
    let orders = rep["orders"].as_array().unwrap();
    assert!(orders[5]["max_diff"].as_f64().unwrap() <= 1e-7);
    assert!(orders[6]["error"].as_str().unwrap().contains("rank"));
}

#[test]
fn unwritable_output_leaves_no_partial_file() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("out");
    fs::write(&blocker, "not a directory").unwrap();
    let o = bin().args(["approx", "--out"]).arg(&blocker).output().unwrap();
    assert_eq!(code(&o), 1);
    assert_eq!(fs::read_to_string(&blocker).unwrap(), "not a directory");
}
