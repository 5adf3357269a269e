use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn copipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copipe"))
        .args(args)
        .env_remove("CO_PIPELINE_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = copipe(args);
    assert!(
        out.status.success(),
        "copipe {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const TWO_STAGE_DESK: &str = r#"{
  "dataset": {"application": "two_stage", "widths": [4, 5, 6], "ks": [10, 20],
              "scenarios": [3, 5], "per_cell": 2, "seed": 11, "lagrangian_iters": 50}
}"#;

const SCHEDULING_SMALL: &str = r#"{
  "dataset": {"application": "scheduling", "sizes": [8, 20], "rhos": [0.2, 1.0, 3.0],
              "per_cell": 3, "seed": 5},
  "train": {"learner": {"box_radius": 10.0, "budget": 60, "seeds": [0, 1]}},
  "eval": {"perturbed_samples": 20, "sigma": 0.2, "seed": 1}
}"#;

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn generate_counts_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TWO_STAGE_DESK);
    let stdout = ok(&["generate", "--config", &cfg, "--out", &p(tmp.path(), "a")]);
    assert!(stdout.contains("24 instances"));
    ok(&["generate", "--config", &cfg, "--out", &p(tmp.path(), "b")]);
    let a = fs::read(tmp.path().join("a/manifest.json")).unwrap();
    let b = fs::read(tmp.path().join("b/manifest.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read_dir(tmp.path().join("a/instances"))
            .unwrap()
            .count(),
        24
    );

    ok(&[
        "generate",
        "--config",
        &cfg,
        "--out",
        &p(tmp.path(), "c"),
        "--seed",
        "12",
    ]);
    let c = fs::read(tmp.path().join("c/manifest.json")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn scheduling_generate_train_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SCHEDULING_SMALL);
    let stdout = ok(&[
        "generate",
        "--config",
        &cfg,
        "--out",
        &p(tmp.path(), "train"),
    ]);
    assert!(stdout.contains("18 instances"));
    ok(&[
        "generate",
        "--config",
        &cfg,
        "--out",
        &p(tmp.path(), "test"),
        "--seed",
        "6",
    ]);
    for run in ["m1", "m2"] {
        ok(&[
            "--threads",
            "2",
            "train",
            "--config",
            &cfg,
            "--data",
            &p(tmp.path(), "train"),
            "--out",
            &p(tmp.path(), run),
        ]);
    }
    let w1 = fs::read(tmp.path().join("m1/weights.json")).unwrap();
    let w2 = fs::read(tmp.path().join("m2/weights.json")).unwrap();
    assert_eq!(w1, w2);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("m1/report.json")).unwrap()).unwrap();
    assert_eq!(report["per_seed"].as_array().unwrap().len(), 2);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);

    let stdout = ok(&[
        "eval",
        "--config",
        &cfg,
        "--data",
        &p(tmp.path(), "test"),
        "--weights",
        &p(tmp.path(), "m1/weights.json"),
        "--out",
        &p(tmp.path(), "res"),
    ]);
    assert!(stdout.contains("learned_pert_ls"));
    let gaps = fs::read_to_string(tmp.path().join("res/gaps.csv")).unwrap();
    let mut lines = gaps.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance_id,algorithm,cost,reference,gap_pct,time_s"
    );
    // 9 instances with n = 8 get a brute-force row
    assert_eq!(lines.count(), 9 * 4 + 9 * 3);
    let summary = fs::read_to_string(tmp.path().join("res/summary.csv")).unwrap();
    assert!(summary.starts_with("bucket,algorithm,instances,delta_avg_pct,delta_max_pct"));
}

#[test]
fn budget_one_returns_box_center() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"dataset": {"application": "scheduling", "sizes": [6], "rhos": [1.0], "per_cell": 2, "seed": 1},
            "train": {"learner": {"box_radius": 4.0, "budget": 1, "seeds": [0]}}}"#,
    );
    ok(&["generate", "--config", &cfg, "--out", &p(tmp.path(), "d")]);
    ok(&[
        "train",
        "--config",
        &cfg,
        "--data",
        &p(tmp.path(), "d"),
        "--out",
        &p(tmp.path(), "m"),
    ]);
    let w: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("m/weights.json")).unwrap()).unwrap();
    assert!(w["w"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v.as_f64() == Some(0.0)));
    assert_eq!(w["M"].as_f64(), Some(4.0));
}

#[test]
fn bounds_prints_both_values() {
    let text = ok(&["bounds", "--M", "10", "--d", "4", "--n", "10000"]);
    assert!(text.contains("sigma_n           2.91680"));
    let json = ok(&[
        "bounds", "--json", "--M", "1", "--d", "2", "--sigma", "1", "--n", "100", "--delta", "0.1",
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let c = 24.0 * std::f64::consts::PI.sqrt();
    let expected = c * 2.0 / 10.0 + (2.0 * 20f64.ln() / 100.0).sqrt();
    assert!((v["excess_risk_bound"].as_f64().unwrap() - expected).abs() < 1e-9);
    assert!((v["C"].as_f64().unwrap() - c).abs() < 1e-12);
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = copipe(&["bounds", "--delta", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));
    let cfg = write_config(tmp.path(), SCHEDULING_SMALL);
    let out = copipe(&[
        "train",
        "--config",
        &cfg,
        "--data",
        &p(tmp.path(), "missing"),
        "--out",
        &p(tmp.path(), "m"),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.json"));
    let out = Command::new(env!("CARGO_BIN_EXE_copipe"))
        .args(["bounds"])
        .env("CO_PIPELINE_THREADS", "0")
        .output()
        .unwrap();
    assert!(!out.status.success());
}
