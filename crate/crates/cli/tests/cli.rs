use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cdsboost"));
    c.env_remove("CDSBOOST_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cdsboost")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "cdsboost {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn schema_check(name: &str, doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulates a small-example replicate and returns the dataset paths and
/// the group file.
fn small_example(dir: &TempDir, seed: &str) -> (Vec<PathBuf>, PathBuf) {
    let out = dir.path().join(format!("sim{seed}"));
    ok(&["simulate", "--preset", "small-example", "--seed", seed, "--out", s(&out)]);
    let data = (1..=3).map(|m| out.join(format!("data_{m}.csv"))).collect();
    (data, out.join("groups.tsv"))
}

fn fit_args<'a>(data: &'a [PathBuf], groups: &'a Path, extra: &[&'a str]) -> Vec<&'a str> {
    let mut a = vec!["fit", "--data"];
    a.extend(data.iter().map(|p| s(p)));
    a.extend(["--groups", s(groups)]);
    a.extend_from_slice(extra);
    a
}

#[test]
fn simulate_writes_table2_layout() {
    let dir = TempDir::new().unwrap();
    ok(&["simulate", "--seed", "5", "--out", s(dir.path())]);
    for m in 1..=3 {
        let text = fs::read_to_string(dir.path().join(format!("data_{m}.csv"))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 201);
        assert!(lines.iter().all(|l| l.split(',').count() == 1001));
    }
    let groups = fs::read_to_string(dir.path().join("groups.tsv")).unwrap();
    assert_eq!(groups.lines().count(), 1000);
    let truth = json(&dir.path().join("truth.json"));
    assert_eq!(truth["n_ig"], 36);
    schema_check("truth.schema.json", &truth);
}

#[test]
fn simulate_aft_has_event_column() {
    let dir = TempDir::new().unwrap();
    ok(&["simulate", "--preset", "small-example", "--model", "aft", "--seed", "2", "--out", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("data_1.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[..2], &["y", "delta"]);
    assert_eq!(header.len(), 202);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let (data, groups) = small_example(&dir, "11");
    let extra = ["--iterations", "60", "--lambda-grid", "0,0.5,2"];
    let serial = ok(&[&["--workers", "1"], &fit_args(&data, &groups, &extra)[..]].concat()).stdout;
    let threaded = ok(&[&["--workers", "3"], &fit_args(&data, &groups, &extra)[..]].concat()).stdout;
    assert_eq!(serial, threaded);

    let bench = |w: &str| {
        ok(&[
            "--workers", w, "benchmark", "--preset", "small-example", "--seed", "4", "--replicates", "2",
            "--iterations", "40", "--lambda-grid", "0,1",
        ])
        .stdout
    };
    assert_eq!(bench("1"), bench("2"));
}

#[test]
fn fit_output_matches_schema() {
    let dir = TempDir::new().unwrap();
    let (data, groups) = small_example(&dir, "3");
    let cd = ok(&fit_args(&data, &groups, &["--iterations", "40", "--lambda-grid", "0,1"])).stdout;
    let cd: Value = serde_json::from_slice(&cd).unwrap();
    schema_check("fit.schema.json", &cd);
    assert!(cd["t_hat"].is_u64());
    assert_eq!(cd["lambda_path"].as_array().unwrap().len(), 2);

    let sep = ok(&fit_args(&data, &groups, &["--method", "sep-sboost", "--iterations", "20"])).stdout;
    let sep: Value = serde_json::from_slice(&sep).unwrap();
    schema_check("fit.schema.json", &sep);
    assert_eq!(sep["t_hat"].as_array().unwrap().len(), 3);
    assert!(sep["lambda"].is_null());
}

#[test]
fn pool_reports_every_group_common() {
    let dir = TempDir::new().unwrap();
    let (data, groups) = small_example(&dir, "8");
    let out = ok(&fit_args(&data, &groups, &["--method", "pool-sboost", "--iterations", "200"])).stdout;
    let v: Value = serde_json::from_slice(&out).unwrap();
    let verdicts = v["group_verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 4);
    assert!(verdicts.iter().all(|g| g["verdict"] == "common"));
}

#[test]
fn cd_detects_the_common_group_in_the_small_example() {
    let dir = TempDir::new().unwrap();
    let (data, groups) = small_example(&dir, "7");
    let out = ok(&fit_args(&data, &groups, &[])).stdout;
    let v: Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["group_verdicts"][0]["group"], 1);
    assert_eq!(v["group_verdicts"][0]["verdict"], "common");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let (data, groups) = small_example(&dir, "1");
    let missing = dir.path().join("nope.tsv");
    let code = |args: &[&str]| run(args).status.code();

    assert_eq!(code(&fit_args(&data, &missing, &[])), Some(3));
    assert_eq!(code(&["fit", "--data", s(&data[0])]), Some(3));
    assert_eq!(code(&fit_args(&data, &groups, &["--method", "lasso"])), Some(3));
    assert_eq!(code(&fit_args(&data, &groups, &["--bogus"])), Some(2));
    assert_eq!(code(&fit_args(&data, &groups, &["--lambda", "-1"])), Some(2));
    assert_eq!(code(&[&["--workers", "0"], &fit_args(&data, &groups, &[])[..]].concat()), Some(3));
    assert_eq!(
        code(&["benchmark", "--preset", "small-example", "--seed", "1", "--methods", "cd,magic"]),
        Some(3)
    );
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn single_replicate_has_zero_spread() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bench.json");
    let table = dir.path().join("table.txt");
    ok(&[
        "benchmark", "--preset", "small-example", "--seed", "9", "--replicates", "1", "--iterations", "50",
        "--lambda", "0.5", "-o", s(&path), "--table", s(&table),
    ]);
    let v = json(&path);
    schema_check("benchmark.schema.json", &v);
    for summary in v["summaries"].as_array().unwrap() {
        for key in ["variable_tp", "variable_fp", "group_tp", "group_fp", "ermse", "prmse"] {
            assert_eq!(summary[key]["sd"], 0.0, "{key}");
        }
    }
    assert_eq!(v["checks"]["pool_identity_violations"], 0);
    assert!(fs::read_to_string(table).unwrap().contains("CD-SBoost"));
}

#[test]
fn aft_stability_scores_with_logrank() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--preset", "small-example", "--model", "aft", "--seed", "6", "--out", s(&sim)]);
    let path = dir.path().join("stab.json");
    let mut args = vec!["stability", "--data"];
    let data: Vec<PathBuf> = (1..=3).map(|m| sim.join(format!("data_{m}.csv"))).collect();
    args.extend(data.iter().map(|p| s(p)));
    let groups = sim.join("groups.tsv");
    args.extend([
        "--groups", s(&groups), "--methods", "cd,pool", "--splits", "4", "--iterations", "40", "--lambda", "1",
        "--seed", "3", "-o", s(&path),
    ]);
    ok(&args);
    let v = json(&path);
    schema_check("stability.schema.json", &v);
    for m in v["methods"].as_array().unwrap() {
        assert_eq!(m["score_kind"], "logrank");
        assert_eq!(m["splits"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let (data, groups) = small_example(&dir, "2");
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# fit settings\nmethod = int-sboost\niterations = 7\nno_standardize = true\n").unwrap();
    let from_file = ok(&[&["--config", s(&cfg)], &fit_args(&data, &groups, &[])[..]].concat()).stdout;
    let v: Value = serde_json::from_slice(&from_file).unwrap();
    assert_eq!(v["method"], "int-sboost");
    assert_eq!(v["iterations"], 7);
    assert_eq!(v["standardized"], false);

    let overridden =
        ok(&[&["--config", s(&cfg)], &fit_args(&data, &groups, &["--iterations", "9"])[..]].concat()).stdout;
    let v: Value = serde_json::from_slice(&overridden).unwrap();
    assert_eq!(v["iterations"], 9);

    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = run(&[&["--config", s(&cfg)], &fit_args(&data, &groups, &[])[..]].concat());
    assert_eq!(out.status.code(), Some(2));
}
