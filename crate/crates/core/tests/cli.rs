mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use fraudkit::pipeline::RunManifest;

fn fraudkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraudkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fraudkit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn extract(files: &DatasetFiles, out: &Path, mode: &str) {
    ok(&[
        "extract",
        "--features",
        s(&files.features),
        "--edges",
        s(&files.edges),
        "--classes",
        s(&files.classes),
        "--mode",
        mode,
        "--out",
        s(out),
    ]);
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn extract_both_modes_and_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let files = write_synthetic(dir.path(), &SyntheticSpec::default());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    extract(&files, &a, "both");
    extract(&files, &b, "both");
    for name in ["graph_features_causal.csv", "graph_features_full.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let causal = std::fs::read_to_string(a.join("graph_features_causal.csv")).unwrap();
    let full = std::fs::read_to_string(a.join("graph_features_full.csv")).unwrap();
    let ids = |t: &str| {
        t.lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(ids(&causal), ids(&full));
    assert_eq!(causal.lines().next(), full.lines().next());
    let m = RunManifest::read(&a).unwrap();
    assert_eq!(m.command, "extract");
    assert_eq!(m.inputs.len(), 3);
    assert!(m.artifact("graph_features_causal.csv").is_some());
}

#[test]
fn audit_reports_leakage_only_with_cross_time_edges() {
    let dir = tempfile::tempdir().unwrap();
    for (cross, steps) in [(false, 1), (true, 4)] {
        let sub = dir.path().join(format!("{cross}"));
        std::fs::create_dir_all(&sub).unwrap();
        let spec = SyntheticSpec {
            timesteps: steps,
            cross_time: cross,
            ..SyntheticSpec::default()
        };
        let files = write_synthetic(&sub, &spec);
        extract(&files, &sub.join("x"), "both");
        ok(&[
            "audit",
            "--causal",
            s(&sub.join("x/graph_features_causal.csv")),
            "--full",
            s(&sub.join("x/graph_features_full.csv")),
            "--out",
            s(&sub.join("audit")),
        ]);
        let report = json(&sub.join("audit/leakage_report.json"));
        let fractions: Vec<f64> = report["columns"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["differing_fraction"].as_f64().unwrap())
            .collect();
        if cross {
            assert!(fractions.iter().any(|&f| f > 0.0));
        } else {
            assert!(fractions.iter().all(|&f| f == 0.0));
        }
    }
}

#[test]
fn train_and_evaluate_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let files = write_synthetic(dir.path(), &SyntheticSpec::default());
    let config = dir.path().join("config.json");
    std::fs::write(&config, synthetic_config(&files, 20, "")).unwrap();
    let model_dirs = [dir.path().join("m1"), dir.path().join("m2")];
    for m in &model_dirs {
        let out = ok(&["train", "--config", s(&config), "--features", "G", "--out", s(m)]);
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("train: wrote"));
    }
    let bytes: Vec<Vec<u8>> = model_dirs
        .iter()
        .map(|m| std::fs::read(m.join("model.json")).unwrap())
        .collect();
    assert_eq!(bytes[0], bytes[1]);
    let model = json(&model_dirs[0].join("model.json"));
    let columns = model["forest"]["schema"]["columns"].as_array().unwrap();
    assert!(columns
        .iter()
        .all(|c| !["a0", "a1", "a2", "a3"].contains(&c.as_str().unwrap())));
    assert!(columns.iter().any(|c| c == "pagerank"));

    let eval = dir.path().join("eval");
    ok(&[
        "evaluate",
        "--config",
        s(&config),
        "--model",
        s(&model_dirs[0].join("model.json")),
        "--out",
        s(&eval),
    ]);
    let summary = json(&eval.join("summary.json"));
    let rows = summary.as_array().unwrap();
    assert!(rows.iter().any(|r| r["split"] == "test" && r["variant"] == "raw"));
    for r in rows {
        let auc = r["roc_auc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc));
    }
    let manifest = RunManifest::read(&eval).unwrap();
    for a in &manifest.artifacts {
        assert!(eval.join(&a.path).is_file(), "{}", a.path);
        let text = std::fs::read_to_string(eval.join(&a.path)).unwrap();
        assert!(!text.contains("timestamp"), "{}", a.path);
    }
    assert!(eval.join("curves/test_raw_roc.csv").is_file());
    assert!(eval.join("reliability/test_isotonic.csv").is_file());
}

#[test]
fn exit_codes_distinguish_data_and_contract_errors() {
    let dir = tempfile::tempdir().unwrap();
    let files = write_synthetic(dir.path(), &SyntheticSpec::default());
    let out = dir.path().join("out");

    std::fs::write(&files.edges, "txId1,txId2\n1,notanumber\n").unwrap();
    let bad_csv = fraudkit(&[
        "extract",
        "--features",
        s(&files.features),
        "--edges",
        s(&files.edges),
        "--classes",
        s(&files.classes),
        "--out",
        s(&out),
    ]);
    assert_eq!(bad_csv.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_csv.stderr).contains("edges.csv"));

    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"train": {"n_trees": 0}}"#).unwrap();
    assert_eq!(
        fraudkit(&["train", "--config", s(&config), "--out", s(&out)])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(&config, "{ not json").unwrap();
    assert_eq!(
        fraudkit(&["train", "--config", s(&config), "--out", s(&out)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(fraudkit(&["train", "--features", "XYZ"]).status.code(), Some(2));
    assert_eq!(fraudkit(&["frobnicate"]).status.code(), Some(2));
}
