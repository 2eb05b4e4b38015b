use rba::experiment::{ExperimentConfig, ExperimentReport};
use rba::stats::mean;

fn run(json: &str) -> ExperimentReport {
    rba::run_experiment(&ExperimentConfig::from_json(json).unwrap()).unwrap()
}

const SMALL: &str = r#"{
  "scenario": {"name": "fig5", "n_src": 60, "n_trg": 60},
  "methods": ["rba", "lr", "uniform",
    {"method": "kernel_rba", "kernel": {"kind": "gaussian", "bandwidth": 0.5}}],
  "selection": {"folds": 3, "grid": [0.0625, 1.0]},
  "ratio": {"folds": 3, "grid": [0.0625, 1.0]},
  "repeats": 4, "seed": 5
}"#;

#[test]
fn aggregates_are_means_of_the_repeats() {
    let rep = run(SMALL);
    assert!(!rep.summary.is_empty());
    for s in &rep.summary {
        let runs = rep.metrics_for(&s.method, s.n_src);
        assert_eq!(runs.len(), s.successes);
        let ll: Vec<f64> = runs.iter().map(|m| m.logloss_bits).collect();
        let acc: Vec<f64> = runs.iter().map(|m| m.accuracy).collect();
        assert!((s.logloss.unwrap().mean - mean(&ll)).abs() <= 1e-12, "{}", s.method);
        assert!((s.accuracy.unwrap().mean - mean(&acc)).abs() <= 1e-12, "{}", s.method);
    }
    // one paired test per method pair
    assert_eq!(rep.paired_tests.len(), 6);
}

#[test]
fn uniform_method_scores_log2_k() {
    let rep = run(SMALL);
    let runs = rep.metrics_for("uniform", 60);
    assert_eq!(runs.len(), 4);
    for m in runs {
        assert!((m.logloss_bits - 1.0).abs() < 1e-12);
        assert!((m.entropy_bits - 1.0).abs() < 1e-12);
    }
}

#[test]
fn repeated_runs_give_identical_reports() {
    let strip = |r: &ExperimentReport| {
        let mut v = serde_json::to_value(r).unwrap();
        v.as_object_mut().unwrap().remove("timestamp");
        serde_json::to_string(&v).unwrap()
    };
    let json = SMALL.replace("\"repeats\": 4", "\"repeats\": 1");
    assert_eq!(strip(&run(&json)), strip(&run(&json)));
}

#[test]
fn report_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run(SMALL);
    rep.write(dir.path()).unwrap();
    for f in ["report.json", "scores.csv", "ratios.csv", "curves.csv"] {
        let meta = std::fs::metadata(dir.path().join(f)).unwrap();
        assert!(meta.len() > 0, "{f}");
    }
    let back: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(back.get("timestamp").is_some());
    assert_eq!(back["repeats"].as_array().unwrap().len(), 4);
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        r#"{"methods": ["rba"]}"#,
        r#"{"scenario": {"name": "fig2"}, "methods": []}"#,
        r#"{"scenario": {"name": "fig2"}, "methods": ["rba"], "repeats": 0}"#,
        r#"{"scenario": {"name": "fig2"}, "methods": ["rba"], "colour": "red"}"#,
        r#"{"scenario": {"name": "fig2"}, "methods": ["svm"]}"#,
    ] {
        let parsed = ExperimentConfig::from_json(bad);
        assert!(parsed.is_err() || rba::run_experiment(&parsed.unwrap()).is_err(), "{bad}");
    }
}
