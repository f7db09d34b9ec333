use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn emmfit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emmfit"))
        .args(args)
        .current_dir(dir)
        .env("EMMFIT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = emmfit(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn gen(dir: &Path, k: &str, n: &str, seed: &str) {
    ok(dir, &["gen", "--m", "2", "--k", k, "--n", n, "--seed", seed]);
}

fn trace_column(path: &Path, column: usize) -> Vec<Option<f64>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').nth(column).unwrap().parse().ok()).collect()
}

#[test]
fn gen_writes_data_and_truth() {
    let dir = TempDir::new().unwrap();
    let out =
        ok(dir.path(), &["gen", "--m", "2", "--k", "3", "--n", "10000", "--ecc", "10", "--sep", "10", "--seed", "7"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "seed 7");
    let csv = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10_000);
    assert!(csv.lines().all(|l| l.split(',').count() == 2));
    let truth = json(&dir.path().join("data.truth.json"));
    assert_eq!(truth["k"], 3);
    assert_eq!(truth["schema_version"], 1);
}

#[test]
fn gen_single_component_and_determinism() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--k", "1", "--n", "500", "--seed", "3", "--out", "a.csv"]);
    ok(dir.path(), &["gen", "--k", "1", "--n", "500", "--seed", "3", "--out", "b.csv"]);
    assert_eq!(json(&dir.path().join("a.truth.json"))["k"], 1);
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn dadam_fit_lowers_the_cost() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "3", "3000", "1");
    let out = emmfit(
        dir.path(),
        &[
            "fit", "--family", "kotz", "a=1", "b=0.5", "s=1", "--k", "3", "--opt", "dadam", "--lr", "0.1", "--iters",
            "500", "--seed", "1", "data.csv",
        ],
    );
    let report = json(&dir.path().join("report.json"));
    assert_eq!(out.status.code() == Some(0), report["failed"] == false);
    assert!(report["final_eval_cost"].as_f64().unwrap() < report["initial_eval_cost"].as_f64().unwrap());
    assert_eq!(trace_column(&dir.path().join("trace.csv"), 0).len(), 500);
    assert_eq!(json(&dir.path().join("model.json"))["family"], "kotz");
}

#[test]
fn em_fit_has_nonincreasing_nll() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "3", "3000", "2");
    ok(dir.path(), &["fit", "--opt", "em", "--k", "3", "--iters", "300", "--seed", "4", "data.csv"]);
    let nll: Vec<f64> = trace_column(&dir.path().join("trace.csv"), 3).into_iter().map(Option::unwrap).collect();
    assert!(!nll.is_empty());
    let report = json(&dir.path().join("report.json"));
    let floored = report["events"].as_array().unwrap().iter().any(|e| e["kind"] != "early_stop");
    if !floored {
        assert!(nll.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

#[test]
fn zero_stepsize_returns_the_initialisation() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "2", "500", "3");
    ok(dir.path(), &["fit", "--opt", "dadam", "--lr", "0", "--k", "2", "--iters", "20", "--seed", "5", "data.csv"]);
    ok(
        dir.path(),
        &[
            "fit",
            "--opt",
            "dadam",
            "--lr",
            "0",
            "--k",
            "2",
            "--iters",
            "1",
            "--seed",
            "5",
            "data.csv",
            "--out-model",
            "init.json",
        ],
    );
    assert_eq!(json(&dir.path().join("model.json")), json(&dir.path().join("init.json")));
}

#[test]
fn trace_downsampling() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "2", "500", "3");
    ok(dir.path(), &["fit", "--k", "2", "--iters", "95", "--trace-every", "10", "data.csv"]);
    let rows: Vec<f64> = trace_column(&dir.path().join("trace.csv"), 0).into_iter().map(Option::unwrap).collect();
    assert_eq!(rows.first(), Some(&1.0));
    assert_eq!(rows.last(), Some(&95.0));
    assert_eq!(rows.len(), 11);
}

#[test]
fn eval_model_against_its_own_sample() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "3", "10000", "6");
    let out = ok(dir.path(), &["eval", "--model", "data.truth.json", "--data", "data.csv"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["wass"].as_f64().unwrap() < 0.02, "{v}");
    assert!(v["nll"].as_f64().is_some());
}

#[test]
fn eval_model_against_itself() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "3", "100", "6");
    ok(dir.path(), &["eval", "--model", "data.truth.json", "--model", "data.truth.json", "--out", "e.json"]);
    let v = json(&dir.path().join("e.json"));
    assert_eq!(v["d_u"].as_f64(), Some(0.0));
    assert_eq!(v["plan"], serde_json::json!([0, 1, 2]));
    assert_eq!(v["pairwise_w2"].as_array().unwrap().len(), 3);
}

#[test]
fn bench_counts_determinism_and_summary() {
    let dir = TempDir::new().unwrap();
    let suite = r#"{"datasets": 3, "inits": 3, "n": 400, "wass_draws": 400, "iters": 40, "methods": ["dadam", "em"]}"#;
    fs::write(dir.path().join("suite.json"), suite).unwrap();
    ok(dir.path(), &["bench", "--suite", "suite.json", "--out-dir", "a"]);
    ok(dir.path(), &["bench", "--suite", "suite.json", "--out-dir", "b", "--no-traces"]);
    let agg = json(&dir.path().join("a/aggregate.json"));
    let cells = agg["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    let runs: u64 = cells.iter().map(|c| c["runs"].as_u64().unwrap()).sum();
    assert_eq!(runs, 18);
    assert_eq!(fs::read_dir(dir.path().join("a/traces")).unwrap().count(), 18);
    assert_eq!(
        fs::read(dir.path().join("a/aggregate.json")).unwrap(),
        fs::read(dir.path().join("b/aggregate.json")).unwrap()
    );

    let out = ok(dir.path(), &["eval", "--bench", "a/aggregate.json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for field in ["wass_mean", "wass_std", "nll_mean", "nll_std", "fail_ratio"] {
        assert!(v["cells"][0].get(field).is_some(), "{field}");
    }
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "2", "100", "0");
    fs::write(dir.path().join("bad.csv"), "1,2\n3\n").unwrap();
    for args in [
        &["fit", "--family", "nope", "--k", "2", "data.csv"][..],
        &["fit", "--k", "2", "missing.csv"],
        &["fit", "--k", "2", "bad.csv"],
        &["fit", "--k", "2", "--lr", "-1", "data.csv"],
        &["eval", "--model", "data.csv", "--data", "data.csv"],
        &["gen", "--k", "0"],
    ] {
        assert_eq!(emmfit(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}
