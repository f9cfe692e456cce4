use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn projres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_projres"))
        .args(args)
        .env_remove("UNLEARN_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schema").join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "integer" => v.is_u64() || v.is_i64(),
        "number" => v.is_number(),
        "null" => v.is_null(),
        other => panic!("unsupported schema type {other}"),
    }
}

/// Checks the subset of JSON Schema used by the report schemas:
/// `type`, `enum`, `required`, `properties` and `items`.
fn validate(schema: &Value, v: &Value, at: &str) {
    if let Some(ty) = schema.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(t, v),
            Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)),
            _ => panic!("bad type in schema at {at}"),
        };
        assert!(ok, "{at}: {v} does not match type {ty}");
    }
    if let Some(Value::Array(options)) = schema.get("enum") {
        assert!(options.contains(v), "{at}: {v} not in {options:?}");
    }
    if let Some(Value::Array(req)) = schema.get("required") {
        for key in req {
            let key = key.as_str().unwrap();
            assert!(v.get(key).is_some(), "{at}: missing required field {key}");
        }
    }
    if let (Some(Value::Object(props)), Some(obj)) = (schema.get("properties"), v.as_object()) {
        for (key, val) in obj {
            let sub = props.get(key).unwrap_or_else(|| panic!("{at}: undocumented field {key}"));
            validate(sub, val, &format!("{at}.{key}"));
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for (i, item) in arr.iter().enumerate() {
            validate(items, item, &format!("{at}[{i}]"));
        }
    }
}

fn gen_data(dir: &Path, n: usize, d: usize) -> PathBuf {
    let path = dir.join("data.csv");
    let out = projres(&[
        "gen-data",
        "--n",
        &n.to_string(),
        "--d",
        &d.to_string(),
        "--p",
        "0.6",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

#[test]
fn unlearn_all_methods_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path(), 80, 6);
    let out = projres(&[
        "unlearn",
        "--data",
        data.to_str().unwrap(),
        "--delete",
        "1,4,9",
        "--method",
        "all",
        "--with-theta",
        "--json",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    validate(&schema("unlearn-report.schema.json"), &report, "$");
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 5);
    assert_eq!(report["deleted"], serde_json::json!([1, 4, 9]));
    for r in results {
        let dist = r["distance_to_retrain"].as_f64().unwrap();
        match r["method"].as_str().unwrap() {
            "retrain" => assert_eq!(dist, 0.0),
            "newton" => assert!(dist < 1e-8),
            _ => {}
        }
        assert_eq!(r["theta"].as_array().unwrap().len(), 6);
    }
}

#[test]
fn unlearn_prints_a_table_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path(), 40, 4);
    let out = projres(&["unlearn", "--data", data.to_str().unwrap(), "--delete", "0", "--method", "residual,newton"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("residual") && text.contains("newton") && !text.contains("influence"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path(), 50, 4);
    let base = ["unlearn", "--data", data.to_str().unwrap(), "--delete-random", "5", "--method", "residual", "--json"];
    let flagged = projres(&[&base[..], &["--seed", "17"]].concat());
    let from_env = Command::new(env!("CARGO_BIN_EXE_projres"))
        .args(base)
        .env("UNLEARN_SEED", "17")
        .output()
        .unwrap();
    let a: Value = serde_json::from_str(&stdout(&flagged)).unwrap();
    let b: Value = serde_json::from_str(&stdout(&from_env)).unwrap();
    assert_eq!(a["deleted"], b["deleted"]);
    assert_eq!(b["seed"], 17);
    assert_eq!(a["deleted"].as_array().unwrap().len(), 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path(), 30, 3);
    let data = data.to_str().unwrap();

    let zero_density = projres(&["gen-data", "--n", "5", "--d", "2", "--p", "0", "--out", "/dev/null"]);
    assert_eq!(code(&zero_density), 2);

    assert_eq!(code(&projres(&["unlearn", "--data", data, "--delete", "30"])), 2);
    assert_eq!(code(&projres(&["unlearn", "--data", data, "--delete", "2,2"])), 2);
    assert_eq!(code(&projres(&["unlearn", "--data", data, "--delete", "x"])), 2);
    assert_eq!(code(&projres(&["unlearn", "--data", data, "--delete", "1", "--method", "sgd"])), 2);
    assert_eq!(code(&projres(&["unlearn", "--data", data])), 2);
    assert_eq!(code(&projres(&["frobnicate"])), 2);
    assert_eq!(code(&projres(&["--help"])), 0);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2,3\n4,oops,6\n").unwrap();
    let out = projres(&["unlearn", "--data", bad.to_str().unwrap(), "--delete", "0"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let missing = projres(&["unlearn", "--data", "/nonexistent.csv", "--delete", "0"]);
    assert_eq!(code(&missing), 3);

    // row 0 alone carries the huge second feature, so its leverage rounds to one
    let degenerate = dir.path().join("degenerate.csv");
    fs::write(&degenerate, "1,1e9,1\n1,0,2\n2,0,3\n").unwrap();
    let out = projres(&["unlearn", "--data", degenerate.to_str().unwrap(), "--delete", "0", "--method", "residual"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn fit_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let prefix = dir.path().join(name);
        let out = projres(&[
            "fit",
            "--n",
            "120",
            "--d",
            "10",
            "--k",
            "3",
            "--trials",
            "4",
            "--seed",
            "9",
            "--omit-timings",
            "--parallel-trials",
            workers,
            "--out",
            prefix.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        (
            fs::read(prefix.with_extension("csv")).unwrap(),
            fs::read(prefix.with_extension("json")).unwrap(),
        )
    };
    let first = run("a", "1");
    assert_eq!(first, run("b", "1"));
    assert_eq!(first, run("c", "3"));

    let report: Value = serde_json::from_slice(&first.1).unwrap();
    validate(&schema("fit-report.schema.json"), &report, "$");
    let csv = String::from_utf8(first.0).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,d,k,p,trials,mean_fit,median_fit,mean_time_ms"));
    assert_eq!(lines.count(), 3);
    let retrain = report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["method"] == "retrain")
        .unwrap();
    assert_eq!(retrain["mean_fit"], 0.0);
}

#[test]
fn bench_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("bench");
    let out = projres(&[
        "bench",
        "--n-sweep",
        "100,200",
        "--d",
        "8",
        "--k",
        "3",
        "--reps",
        "2",
        "--methods",
        "residual,retrain",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(prefix.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert_eq!(csv, stdout(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap();
    validate(&schema("bench-report.schema.json"), &report, "$");
}

#[test]
fn gen_data_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str| {
        let path = dir.path().join(name);
        let args = ["gen-data", "--n", "10", "--d", "3", "--p", "1", "--seed", "7", "--out", path.to_str().unwrap()];
        assert_eq!(code(&projres(&args)), 0);
        fs::read_to_string(path).unwrap()
    };
    let a = write("a.csv");
    assert_eq!(a.lines().count(), 10);
    assert!(a.lines().all(|l| l.split(',').count() == 4));
    assert_eq!(a, write("b.csv"));
}

#[test]
fn full_span_deletion_recovers_retrain() {
    // k = 1 ≥ d = 1, so the residual update lands on the retrained model
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.csv");
    fs::write(&toy, "1,0\n1,2\n").unwrap();
    let out = projres(&["unlearn", "--data", toy.to_str().unwrap(), "--delete", "0", "--method", "residual,retrain", "--with-theta", "--json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for r in report["results"].as_array().unwrap() {
        assert!(r["distance_to_retrain"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn fit_with_retrain_only_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("fit");
    let out = projres(&[
        "fit", "--n", "100", "--d", "8", "--k", "4", "--trials", "50", "--methods", "retrain", "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap();
    assert_eq!(report["methods"][0]["mean_fit"], 0.0);
    assert_eq!(report["methods"][0]["completed"], 50);
}
