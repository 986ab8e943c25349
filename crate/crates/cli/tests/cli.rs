use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn levelset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levelset")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("levelset-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const GRID: &str = r#"{
  "name": "tiny",
  "instance": {
    "generator": {"kind": "explicit_linear", "theta": [1.0, 0.0],
                  "points": [[1.0, 0.0], [0.8, 0.6], [0.2, 0.98], [0.0, 1.0]]},
    "threshold": {"kind": "explicit", "alpha": 0.5}
  },
  "algorithms": [{"kind": "melk"}, {"kind": "baseline", "policy": "truvar", "noise_var": 0.01}],
  "seeds": [0],
  "budget": 100000,
  "checkpoints": [100, 100000]
}"#;

#[test]
fn run_then_summarize() {
    let dir = scratch("run");
    let cfg = write(&dir, "grid.json", GRID);
    let out = dir.join("out");
    let o = levelset(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seeds", "0..3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2 * 3 * 2);

    let summary = dir.join("summary.csv");
    let o = levelset(&["summarize", out.join("metrics.csv").to_str().unwrap(), "--out", summary.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(summary).unwrap();
    assert!(text.starts_with("algorithm,"));
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn malformed_config_exits_with_code_2() {
    let dir = scratch("bad");
    let cfg = write(&dir, "bad.json", r#"{"name": "x", "instance": 5}"#);
    let o = levelset(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));

    let o = levelset(&["run", "--config", dir.join("missing.json").to_str().unwrap(), "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write(&dir, "grid.json", GRID);
    let o = levelset(&["run", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seeds", "3..1"]);
    assert_eq!(o.status.code(), Some(2));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn design_solve_prints_weights() {
    let dir = scratch("design");
    let cfg = write(
        &dir,
        "design.json",
        r#"{"points": [[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]], "kernel": {"kind": "linear"}, "gamma": 0.0}"#,
    );
    let o = levelset(&["design-solve", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let w: Vec<f64> = serde_json::from_value(v["weights"].clone()).unwrap();
    assert_eq!(w.len(), 3);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    // G-optimal value in d = 2 is d
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() < 0.05);
    let _ = fs::remove_dir_all(&dir);
}

const INSTANCE: &str = r#"{
  "instance": {"generator": {"kind": "gp_draw", "lengthscale": 0.3, "n_per_dim": 5, "dim": 2},
               "threshold": {"kind": "quantile", "q": 0.5}},
  "seed": 1,
  "gamma": 1e-6
}"#;

#[test]
fn env_generate_is_reproducible() {
    let dir = scratch("env");
    let cfg = write(&dir, "inst.json", INSTANCE);
    let a = levelset(&["env-generate", "--config", &cfg]);
    let b = levelset(&["env-generate", "--config", &cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let c = levelset(&["env-generate", "--config", &cfg, "--seeds", "2"]);
    assert_ne!(a.stdout, c.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["true_f"].as_array().unwrap().len(), 25);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn oracle_allocation_writes_csv() {
    let dir = scratch("oracle");
    let cfg = write(&dir, "inst.json", INSTANCE);
    let out = dir.join("alloc.csv");
    let o = levelset(&["oracle-allocation", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 25);
    let total: f64 = rows
        .iter()
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols[cols.len() - 1], "-2");
            cols[cols.len() - 2].parse::<f64>().unwrap()
        })
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    let _ = fs::remove_dir_all(&dir);
}
