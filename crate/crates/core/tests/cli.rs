use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn snce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snce"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_lines(o: &Output) -> Vec<Value> {
    stdout(o)
        .lines()
        .map(|l| serde_json::from_str(l).expect("JSON line"))
        .collect()
}

fn bundled(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn neighbor_mode_is_the_quantized_token() {
    let o = snce(&["neighbor", "--z", "-2,0", "--tau", "0.71", "--top-n", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 5);
    let grid = snce::grid_codebook(-5.0, 5.0, 50).unwrap();
    assert_eq!(lines[0]["token"], grid.quantize(&[-2.0, 0.0]).unwrap());
    assert!(stderr(&o).contains("manifest"));
}

#[test]
fn neighbor_top_one_is_certain() {
    let o = snce(&["neighbor", "--z", "1.3,-0.4", "--topk", "1"]);
    assert!(o.status.success());
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["probability"], 1.0);
}

#[test]
fn neighbor_three_code_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("three.sncb");
    let cb = snce::Codebook::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], snce::Metric::L2Squared)
        .unwrap();
    snce::codebook::save_codebook(&cb, &file).unwrap();
    let csv = dir.path().join("q.csv");
    let out = dir.path().join("run");
    let o = snce(&[
        "neighbor", "--codebook", path(&file), "--z", "0,0", "--two-tau-sq", "1",
        "--csv", path(&csv), "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = json_lines(&o);
    let e = [1.0, (-1.0f64).exp(), (-4.0f64).exp()];
    let z: f64 = e.iter().sum();
    for (rank, line) in lines.iter().enumerate() {
        assert_eq!(line["token"], rank);
        let p = line["probability"].as_f64().unwrap();
        assert!((p - e[rank] / z).abs() < 1e-15);
    }
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "neighbor");
}

#[test]
fn neighbor_dimension_mismatch_is_usage_error() {
    let o = snce(&["neighbor", "--z", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dimension mismatch"));
}

#[test]
fn missing_arguments_are_usage_errors() {
    assert_eq!(snce(&["neighbor"]).status.code(), Some(2));
    assert_eq!(snce(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn toy_default_config_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = snce(&[
        "toy", "--config", &bundled("toy_default.json"), "--steps", "10", "--out", path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for label in ["l2", "ce", "snce"] {
        let report = dir.path().join(label).join("seed0").join("report.json");
        let v: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
        assert_eq!(v["seed"], 0);
        assert!(dir.path().join(label).join("seed0/learned_grid.csv").exists());
    }
    let truth = fs::read_to_string(dir.path().join("truth_grid.csv")).unwrap();
    assert_eq!(truth.lines().count(), 2501);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "toy");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|p| p == "summary.csv"));
}

#[test]
fn toy_zero_grid_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"toy": {"grid": {"lo": -5, "hi": 5, "n_per_axis": 0}}}"#).unwrap();
    let o = snce(&["toy", "--config", path(&cfg), "--out", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_per_axis"), "{}", stderr(&o));
}

#[test]
fn toy_unknown_field_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"toy": {"step": 10}}"#).unwrap();
    let o = snce(&["toy", "--config", path(&cfg), "--out", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
}

#[test]
fn toy_seed_list_adds_aggregate_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = snce(&["toy", "--seeds", "1,2,3", "--steps", "5", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    for label in ["l2", "ce", "snce"] {
        let rows: Vec<&str> = summary.lines().filter(|l| l.starts_with(&format!("{label},"))).collect();
        assert_eq!(rows.len(), 4, "{label}: {rows:?}");
        assert!(rows.iter().any(|r| r.starts_with(&format!("{label},mean,"))));
    }
}

#[test]
fn verify_passes_and_reports_json() {
    let o = snce(&["verify", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 15);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn broken_gradient_fails_verification() {
    let o = snce(&["verify", "--break-gradient"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("logit_gradient_fd"));
    assert!(stdout(&o).contains("FAIL logit_gradient_fd"));
}

#[test]
fn bench_checks_against_reference() {
    let o = snce(&["bench", "--k", "4096", "--d", "16", "--l", "32", "--topk", "64"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["max_naive_deviation"].as_f64().unwrap() < 1e-6);
    assert!(v["max_topk_sum_deviation"].as_f64().unwrap() <= 1e-9);
    assert!(v["dense_probs_per_sec"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_large_codebook_topk_normalizes() {
    let o = snce(&["bench", "--k", "131072", "--d", "8", "--l", "8", "--topk", "64"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["max_topk_sum_deviation"].as_f64().unwrap() <= 1e-9);
    assert!(v["max_dense_sum_deviation"].as_f64().unwrap() < 1e-6);
}

#[test]
fn bench_rejects_oversize_parameters() {
    let o = snce(&["bench", "--k", "100000000", "--d", "64"]);
    assert_eq!(o.status.code(), Some(2));
    let o = snce(&["bench", "--k", "16", "--topk", "17"]);
    assert_eq!(o.status.code(), Some(2));
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn without_timestamps(manifest: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("started_unix_ms");
    obj.remove("finished_unix_ms");
    v
}

#[test]
fn toy_outputs_do_not_depend_on_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let o = snce(&[
            "--threads", threads, "toy", "--seeds", "0,1", "--steps", "15", "--out", path(dir.path()),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let files = files_under(a.path());
    assert_eq!(files, files_under(b.path()));
    for f in &files {
        if f == Path::new("manifest.json") {
            assert_eq!(without_timestamps(&a.path().join(f)), without_timestamps(&b.path().join(f)));
        } else {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f:?}");
        }
    }
}
