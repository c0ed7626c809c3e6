use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn snc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn train_then_evaluate_predict_report_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixtures().join("data/seismic-bumps-mini.csv");
    let meta = fixtures().join("data/seismic-bumps-synthetic.meta.json");
    let auto = dir.path().join("auto.json");
    let guided = dir.path().join("guided.json");

    let out = snc(&[
        "train",
        "--data",
        path(&data),
        "--meta",
        path(&meta),
        "--measure",
        "ConditionalEntropy",
        "--mincov",
        "11",
        "--out",
        path(&auto),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("r1: IF "));

    let knowledge = fixtures().join("knowledge/guided-c1.json");
    let out = snc(&[
        "train",
        "--data",
        path(&data),
        "--meta",
        path(&meta),
        "--measure",
        "ConditionalEntropy",
        "--mincov",
        "11",
        "--knowledge",
        path(&knowledge),
        "--out",
        path(&guided),
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 2);

    let out = snc(&[
        "evaluate",
        "--model",
        path(&auto),
        "--data",
        path(&data),
        "--positive-class",
        "1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("positive class: 1") && text.contains("Gm = "), "{text}");

    let predictions = dir.path().join("pred.csv");
    let out = snc(&[
        "predict",
        "--model",
        path(&auto),
        "--data",
        path(&data),
        "--out",
        path(&predictions),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&predictions).unwrap();
    assert_eq!(csv.lines().next(), Some("id,prediction,covering_rules"));
    assert_eq!(csv.lines().count(), 431);

    let out = snc(&[
        "report",
        "--model",
        path(&auto),
        "--data",
        path(&data),
        "--alpha",
        "0.05",
        "--json",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report["ruleCount"].as_u64().unwrap() >= 1);

    let out = snc(&[
        "similarity",
        "--model-a",
        path(&auto),
        "--model-b",
        path(&auto),
        "--data",
        path(&data),
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "1.000000");
    let out = snc(&[
        "similarity",
        "--model-a",
        path(&auto),
        "--model-b",
        path(&guided),
        "--data",
        path(&data),
    ]);
    let s: f64 = stdout(&out).trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&s));
}

#[test]
fn experiment_prints_a_result_row_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixtures().join("guided-r2.json");
    let out = snc(&[
        "--threads",
        "1",
        "experiment",
        "--config",
        path(&config),
        "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let row = text.lines().find(|l| l.starts_with("guided-r2")).expect("result row");
    assert!(row.contains("RRSE") || text.contains("RRSE"));
    for file in ["results.json", "table.txt", "model.json", "model.txt"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(snc(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(snc(&[]).status.code(), Some(1));
    assert_eq!(
        snc(&["--threads", "0", "report", "--model", "m", "--data", "d"])
            .status
            .code(),
        Some(1)
    );
    let out = snc(&["report", "--model", "m.json", "--data", "d.csv", "--alpha", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_two() {
    let missing = snc(&["evaluate", "--model", "/nonexistent/model.json", "--data", "x.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = snc(&["evaluate", "--model", path(&bad), "--data", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn help_and_version_succeed() {
    assert!(snc(&["--help"]).status.success());
    assert!(snc(&["--version"]).status.success());
}
