mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hawkfs::Dataset;
use serde_json::{json, Value};

fn hawkfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hawkfs"))
        .args(args)
        .env("HAWKFS_THREADS", "2")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let d: Dataset = common::first_feature_task(150, 4, 3);
        d.write_csv(&root.join("data.csv")).unwrap();
        Workspace { _dir: dir, root }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn config(&self, name: &str, out: &str, extra: Value) -> PathBuf {
        let mut c = json!({
            "dataset_id": "toy",
            "dataset": {"kind": "csv", "path": self.p("data.csv"), "label_column": "label"},
            "search": {"population_size": 4, "max_iterations": 3, "levy_beta": 1.5},
            "n_runs": 1,
            "output_dir": self.p(out),
            "seed": 5,
        });
        for (k, v) in extra.as_object().unwrap() {
            c[k] = v.clone();
        }
        let path = self.p(name);
        std::fs::write(&path, serde_json::to_vec_pretty(&c).unwrap()).unwrap();
        path
    }
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

fn read(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn prepared_bytes(out: &Path) -> Vec<Vec<u8>> {
    ["train.csv", "validation.csv", "test.csv", "normalization.json", "manifest.json"]
        .iter()
        .map(|f| std::fs::read(out.join("prepared").join(f)).unwrap())
        .collect()
}

#[test]
fn prepare_is_byte_reproducible() {
    let w = Workspace::new();
    let cfg = w.config("c.json", "out", json!({}));
    let cfg = cfg.to_str().unwrap();
    ok(&hawkfs(&["prepare", "--config", cfg]));
    let first = prepared_bytes(&w.p("out"));
    ok(&hawkfs(&["prepare", "--config", cfg]));
    assert_eq!(first, prepared_bytes(&w.p("out")));
    let m = read(&w.p("out/prepared/manifest.json"));
    let total = m["n_train"].as_u64().unwrap() + m["n_validation"].as_u64().unwrap() + m["n_test"].as_u64().unwrap();
    assert_eq!(total, 150);
}

#[test]
fn missing_label_column_is_a_usage_error() {
    let w = Workspace::new();
    let data = w.p("data.csv");
    let out = w.p("out");
    let o = hawkfs(&["prepare", "--data", data.to_str().unwrap(), "--label", "target", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("target"), "{}", stderr(&o));
}

#[test]
fn run_without_prepare_points_at_prepare() {
    let w = Workspace::new();
    let cfg = w.config("c.json", "out", json!({}));
    let o = hawkfs(&["run", "--config", cfg.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("prepare"), "{}", stderr(&o));
}

#[test]
fn centralized_then_distributed_then_compare() {
    let w = Workspace::new();
    let central = w.config("c.json", "central", json!({}));
    let dist = w.config("d.json", "dist", json!({"scheme": "distributed", "n_clients": 2}));
    for cfg in [&central, &dist] {
        ok(&hawkfs(&["prepare", "--config", cfg.to_str().unwrap()]));
        ok(&hawkfs(&["run", "--config", cfg.to_str().unwrap()]));
    }

    let c = read(&w.p("central/report.json"));
    assert_eq!(c["runs"].as_array().unwrap().len(), 1);
    assert_eq!(c["aggregate"]["n"], 1);
    assert!(c.get("clients").is_none());
    assert!(w.p("central/curves/run_0.csv").exists());
    assert!(w.p("central/selected_features.json").exists());

    let d = read(&w.p("dist/report.json"));
    assert_eq!(d["clients"].as_array().unwrap().len(), 2);
    assert_eq!(d["aggregate"]["n"], 2);
    let mean_f = d["clients"].as_array().unwrap().iter().map(|e| e["test"]["f_measure"].as_f64().unwrap()).sum::<f64>() / 2.0;
    assert!((d["aggregate"]["mean"]["f_measure"].as_f64().unwrap() - mean_f).abs() < 1e-12);

    let cmp_dir = w.p("cmp");
    std::fs::create_dir_all(&cmp_dir).unwrap();
    let o = hawkfs(&[
        "report",
        w.p("central/report.json").to_str().unwrap(),
        w.p("dist/report.json").to_str().unwrap(),
        "--out",
        cmp_dir.to_str().unwrap(),
    ]);
    ok(&o);
    let csv = std::fs::read_to_string(cmp_dir.join("comparison.csv")).unwrap();
    assert!(csv.lines().count() >= 5, "{csv}");
    assert!(csv.contains("f_measure"));
}

#[test]
fn identical_reports_compare_to_zero_deltas() {
    let w = Workspace::new();
    let cfg = w.config("c.json", "out", json!({}));
    ok(&hawkfs(&["prepare", "--config", cfg.to_str().unwrap()]));
    ok(&hawkfs(&["run", "--config", cfg.to_str().unwrap()]));
    let r = w.p("out/report.json");
    let r = r.to_str().unwrap();
    let o = hawkfs(&["report", r, r]);
    ok(&o);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let csv: Vec<&str> = stdout.lines().skip_while(|l| !l.starts_with("metric,")).collect();
    assert!(csv.len() >= 5, "{stdout}");
    for line in &csv[1..] {
        let delta: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(delta, 0.0, "{line}");
    }
}

#[test]
fn missing_report_is_a_usage_error() {
    let w = Workspace::new();
    let a = w.p("nope.json");
    let o = hawkfs(&["report", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn invalid_config_lists_every_problem() {
    let w = Workspace::new();
    let cfg = w.config(
        "bad.json",
        "out",
        json!({"n_runs": 0, "knn_k": 0, "scheme": "distributed", "n_clients": 1}),
    );
    let o = hawkfs(&["prepare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for needle in ["n_runs", "knn_k", "n_clients"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(hawkfs(&["run", "--scheme", "federated"]).status.code(), Some(2));
    assert_eq!(hawkfs(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(hawkfs(&["--help"]).status.code(), Some(0));
}
