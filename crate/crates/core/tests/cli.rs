use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::{Retrieve, Uri};
use serde_json::Value;

fn monoracle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monoracle"))
        .args(args)
        .env_remove("MONORACLE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = monoracle(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

struct SchemaFiles;

impl Retrieve for SchemaFiles {
    fn retrieve(
        &self,
        uri: &Uri<String>,
    ) -> Result<Value, Box<dyn std::error::Error + Send + Sync>> {
        let name = uri.as_str().rsplit('/').next().unwrap_or_default();
        Ok(serde_json::from_str(&fs::read_to_string(
            schema_dir().join(name),
        )?)?)
    }
}

fn assert_valid(schema: &str, doc: &Value) {
    let schema = read_json(&schema_dir().join(schema));
    let validator = jsonschema::options()
        .with_retriever(SchemaFiles)
        .build(&schema)
        .unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn fit_is_deterministic_and_monotone() {
    let args = [
        "fit",
        "--model",
        "laplace:0,1",
        "--n",
        "500",
        "--seed",
        "7",
        "--format",
        "json",
    ];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    let doc: Value = serde_json::from_str(&a).unwrap();
    assert_valid("kernel.schema.json", &doc);
    let v: Vec<f64> = doc["v"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(v[0], 1.0);
    assert!(v.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(doc["config"]["seed"], 7);
}

#[test]
fn fit_writes_kernel_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = out.to_str().unwrap();
    let run = monoracle(&[
        "fit",
        "--model",
        "gaussian:0,1",
        "--n",
        "100",
        "--t",
        "5",
        "--out",
        o,
    ]);
    assert_eq!(run.status.code(), Some(0));
    assert!(run.stdout.is_empty());
    let kernel = read_json(&out.join("kernel.json"));
    assert_valid("kernel.schema.json", &kernel);
    assert_eq!(kernel["t"], 5);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().starts_with("# monoracle fit "));
    assert_eq!(lines.next(), Some("t,m,cv,guaranteed_gap"));
    let cvs: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(cvs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.txt", "0.5\n");
    assert_eq!(monoracle(&["fit", "--sample", &one]).status.code(), Some(2));
    assert_eq!(
        monoracle(&["fit", "--model", "gaussian:0,1", "--n", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(monoracle(&["fit"]).status.code(), Some(2));
    assert_eq!(
        monoracle(&["fit", "--model", "nope:1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        monoracle(&["fit", "--model", "gaussian:0,1", "--sample", &one])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(monoracle(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_file_exits_three() {
    let run = monoracle(&["fit", "--sample", "/nonexistent/sample.txt"]);
    assert_eq!(run.status.code(), Some(3));
}

#[test]
fn estimate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let kernel = write(d, "k.json", r#"{"W": 1.0, "t": 0, "v": [1.0]}"#);
    let sample = write(d, "s.txt", "# one point\n0\n");
    let points = write(d, "p.txt", "0\n");
    let csv = stdout(&[
        "estimate", "--sample", &sample, "--kernel", &kernel, "--points", &points,
    ]);
    let mut lines = csv.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some("x,fhat"));
    let value: f64 = lines
        .next()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 1.0 / PI).abs() < 1e-15);

    let empty = write(d, "empty.txt", "");
    let csv = stdout(&[
        "estimate", "--sample", &sample, "--kernel", &kernel, "--points", &empty,
    ]);
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, ["x,fhat"]);

    let many: String = (0..1000)
        .map(|i| format!("{}\n", i as f64 * 0.01 - 5.0))
        .collect();
    let many = write(d, "many.txt", &many);
    let out = d.join("est");
    let run = monoracle(&[
        "estimate",
        "--model",
        "gaussian:0,1",
        "--n",
        "50",
        "--kernel",
        &kernel,
        "--points",
        &many,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("estimate.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1001);
    let doc = read_json(&out.join("estimate.json"));
    assert_valid("estimate.schema.json", &doc);
    assert_eq!(doc["fhat"].as_array().unwrap().len(), 1000);
}

#[test]
fn estimate_rejects_non_monotone_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let kernel = write(
        dir.path(),
        "k.json",
        r#"{"W": 2.0, "t": 0, "v": [1.0, 1.5]}"#,
    );
    let points = write(dir.path(), "p.txt", "0\n");
    let run = monoracle(&[
        "estimate",
        "--model",
        "gaussian:0,1",
        "--kernel",
        &kernel,
        "--points",
        &points,
    ]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn oracle_beats_minimax_and_improves_with_n() {
    let doc = |n: &str| -> Value {
        serde_json::from_str(&stdout(&[
            "oracle",
            "--model",
            "laplace:0,1",
            "--n",
            n,
            "--format",
            "json",
        ]))
        .unwrap()
    };
    let small = doc("100");
    let large = doc("1000000");
    assert_valid("oracle.schema.json", &small);
    let mise = small["mise"].as_f64().unwrap();
    for m in small["minimax"].as_array().unwrap() {
        assert!(mise <= m["mise"].as_f64().unwrap() + 1e-12);
    }
    assert!(large["mise"].as_f64().unwrap() < mise);
    assert_eq!(small["kernel"]["v"][0], 1.0);
}

#[test]
fn bench_is_deterministic_with_summary_fields() {
    let args = [
        "bench",
        "--model",
        "gaussian:0,1",
        "--n",
        "40",
        "--reps",
        "4",
        "--seed",
        "3",
        "--t",
        "3",
        "--format",
        "csv",
    ];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows[0],
        "replication,n,t,cv,ise,mise_oracle,ratio,cv_oracle,wall_time"
    );
    assert_eq!(rows.len(), 5);
    assert!(rows[1..]
        .iter()
        .enumerate()
        .all(|(r, l)| l.starts_with(&format!("{r},"))));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    assert_eq!(monoracle(&with_out).status.code(), Some(0));
    let summary = read_json(&out.join("summary.json"));
    assert_valid("bench-summary.schema.json", &summary);
    for key in ["mean_ratio", "se", "n", "R", "W", "t"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    assert!(summary["mean_ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["R"], 4);
    assert!(summary.get("wall_time").is_none());
}

#[test]
fn diag_default_run_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let run = monoracle(&[
        "diag",
        "--model",
        "gaussian:0,1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let doc = read_json(&out.join("diag.json"));
    assert_valid("diag.schema.json", &doc);
    assert_eq!(doc["violations"], 0);
    assert_eq!(doc["d_n"], 6);
    assert_eq!(doc["config"]["n"], 200);
    let lambda_threshold = 200f64.ln().powf(1.5) / 200.0;
    let echoed = doc["favorable"]["u_statistic_threshold"].as_f64().unwrap();
    assert!((echoed - lambda_threshold).abs() < 1e-15);
    let csv = fs::read_to_string(out.join("exceedances.csv")).unwrap();
    assert!(csv
        .lines()
        .any(|l| l == "event,kind,s,t,threshold,exceedances,frequency,max_abs"));
}

#[test]
fn diag_flags_non_monotone_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let v: Vec<String> = (0..128)
        .map(|k| if k % 2 == 0 { "1.0" } else { "0.0" }.to_string())
        .collect();
    let kernel = write(
        dir.path(),
        "bad.json",
        &format!(r#"{{"W": 16.0, "t": 3, "v": [{}]}}"#, v.join(",")),
    );
    let run = monoracle(&[
        "diag",
        "--model",
        "gaussian:0,1",
        "--reps",
        "5",
        "--kernel",
        &kernel,
        "--format",
        "json",
    ]);
    assert_eq!(run.status.code(), Some(1));
    let doc: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_valid("diag.schema.json", &doc);
    assert!(doc["violations"].as_u64().unwrap() > 0);
}

#[test]
fn thread_cap_does_not_change_output() {
    let args = [
        "bench",
        "--model",
        "laplace:0,1",
        "--n",
        "30",
        "--reps",
        "3",
        "--t",
        "2",
    ];
    let plain = stdout(&args);
    let capped = Command::new(env!("CARGO_BIN_EXE_monoracle"))
        .args(args)
        .env("MONORACLE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(capped.stdout).unwrap(), plain);
}
