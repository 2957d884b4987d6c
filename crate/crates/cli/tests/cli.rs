use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FAST: &str = r#"{
  "version": 1,
  "pipeline": {
    "selection": {"ga": {"population_size": 6, "generations": 3}},
    "hyperparameters": {"rf_n_trees": 8, "gbt_n_rounds": 10},
    "tuner": {"sa": {"n_agents": 2, "iterations": 2}}
  },
  "sweep": {"eta_values": [0.3], "at_risk_fractions": [0.2, 0.5], "repeats": 1},
  "folds": 3
}"#;

fn flowguard(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowguard"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), FAST).unwrap();
    let out = flowguard(
        dir.path(),
        &["synth", "--normal", "240", "--attack", "80", "--noise", "3", "--seed", "1", "--out", "syn"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_report_and_manifest() {
    let w = workspace();
    let out = flowguard(
        w.path(),
        &["run", "--input", "syn/data.csv", "--config", "cfg.json", "--seed", "42", "--out", "results"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&w.path().join("results/run_report.json"));
    assert!(report.get("timings").is_none());
    assert_eq!(report["seed"], 42);
    assert!(report["metrics"]["soft"]["accuracy"].as_f64().unwrap() > 0.8);
    let timings = json(&w.path().join("results/timings.json"));
    assert!(timings["total"].as_f64().unwrap() >= 0.0);

    let manifest = json(&w.path().join("results/manifest.json"));
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["seed_source"], "flag");
    let names: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["metrics.json", "model.json", "run_report.json", "timings.json"]);
    let listed: std::collections::BTreeSet<String> = std::fs::read_dir(w.path().join("results"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(listed.len(), names.len() + 1);
}

#[test]
fn usage_errors_exit_one() {
    let w = workspace();
    assert_eq!(flowguard(w.path(), &["run", "--out", "x"]).status.code(), Some(1));
    let bogus = flowguard(w.path(), &["frobnicate"]);
    assert_eq!(bogus.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bogus.stderr).contains("Usage"));
    assert_eq!(flowguard(w.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(flowguard(w.path(), &["--version"]).status.code(), Some(0));
    let zero = flowguard(w.path(), &["synth", "--seed", "1", "--threads", "0", "--out", "t"]);
    assert_eq!(zero.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let w = workspace();
    std::fs::write(w.path().join("nolabel.csv"), "a,b\n1,2\n3,4\n").unwrap();
    let out = flowguard(w.path(), &["run", "--input", "nolabel.csv", "--seed", "1", "--out", "r"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("label"));

    std::fs::write(w.path().join("typo.json"), r#"{"version": 1, "pipline": {}}"#).unwrap();
    let out = flowguard(
        w.path(),
        &["run", "--input", "syn/data.csv", "--config", "typo.json", "--seed", "1", "--out", "r"],
    );
    assert_eq!(out.status.code(), Some(2));

    let out = flowguard(
        w.path(),
        &["run", "--input", "syn/data.csv", "--train-fraction", "1.5", "--seed", "1", "--out", "r"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = flowguard(w.path(), &["run", "--input", "missing.csv", "--seed", "1", "--out", "r"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_seed_is_drawn_and_recorded() {
    let w = workspace();
    let out = flowguard(w.path(), &["synth", "--normal", "20", "--attack", "10", "--out", "s"]);
    assert!(out.status.success());
    let manifest = json(&w.path().join("s/manifest.json"));
    assert_eq!(manifest["seed_source"], "random");
    let seed = manifest["seed"].as_u64().unwrap();
    let again = flowguard(
        w.path(),
        &["synth", "--normal", "20", "--attack", "10", "--seed", &seed.to_string(), "--out", "s2"],
    );
    assert!(again.status.success());
    assert_eq!(
        std::fs::read(w.path().join("s/data.csv")).unwrap(),
        std::fs::read(w.path().join("s2/data.csv")).unwrap()
    );
}

#[test]
fn config_seed_is_used_when_no_flag() {
    let w = workspace();
    std::fs::write(w.path().join("seeded.json"), r#"{"version": 1, "seed": 77}"#).unwrap();
    let out = flowguard(w.path(), &["synth", "--normal", "20", "--attack", "10", "--config", "seeded.json", "--out", "s"]);
    assert!(out.status.success());
    let manifest = json(&w.path().join("s/manifest.json"));
    assert_eq!(manifest["seed"], 77);
    assert_eq!(manifest["seed_source"], "config");
}

#[test]
fn train_then_evaluate() {
    let w = workspace();
    let args = ["train", "--input", "syn/data.csv", "--config", "cfg.json", "--seed", "3", "--out", "m"];
    assert!(flowguard(w.path(), &args).status.success());
    let report = json(&w.path().join("m/train_report.json"));
    let out = flowguard(
        w.path(),
        &["evaluate", "--input", "syn/data.csv", "--model", "m/model.json", "--voting", "hard", "--seed", "3", "--out", "e"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = json(&w.path().join("e/metrics.json"));
    assert_eq!(metrics["voting"], "hard");
    assert_eq!(metrics["model_fingerprint"], report["model_fingerprint"]);
    assert!(metrics["metrics"]["accuracy"].as_f64().unwrap() > 0.8);
    let preds = std::fs::read_to_string(w.path().join("e/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 321);
}

#[test]
fn stage_commands_emit_their_files() {
    let w = workspace();
    let base = ["--input", "syn/data.csv", "--config", "cfg.json", "--seed", "5"];
    let expect: [(&str, &[&str]); 7] = [
        ("preprocess", &["processed.csv", "preprocess_state.json", "preprocess_report.json"]),
        ("score", &["scores.csv", "prefilter_mask.json"]),
        ("select", &["selection.json", "fitness_history.csv"]),
        ("tune", &["tuning.json", "tuning_trace.csv"]),
        ("sweep", &["sweep.csv", "sweep.json"]),
        ("compare-voting", &["voting.csv", "voting.json"]),
        ("cv", &["cv.csv", "cv.json"]),
    ];
    for (cmd, files) in expect {
        let mut args = vec![cmd];
        args.extend(base);
        args.extend(["--out", cmd]);
        if cmd == "score" {
            args.extend(["--keep-top", "3"]);
        }
        let out = flowguard(w.path(), &args);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        for f in files {
            assert!(w.path().join(cmd).join(f).exists(), "{cmd} did not write {f}");
        }
    }
    let prefilter = json(&w.path().join("score/prefilter_mask.json"));
    assert_eq!(prefilter.as_array().unwrap().iter().filter(|b| b.as_bool().unwrap()).count(), 3);
    let cv = std::fs::read_to_string(w.path().join("cv/cv.csv")).unwrap();
    assert_eq!(cv.lines().count(), 5);
    let sweep = std::fs::read_to_string(w.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);

    // A selection file feeds the tuner.
    let mut args = vec!["tune"];
    args.extend(base);
    args.extend(["--mask", "select/selection.json", "--out", "tuned"]);
    assert!(flowguard(w.path(), &args).status.success());
    let tuned = json(&w.path().join("tuned/tuning.json"));
    let selection = json(&w.path().join("select/selection.json"));
    assert_eq!(tuned["selected_mask"], selection["selected_mask"]);
}

#[test]
fn flags_override_config_values() {
    let w = workspace();
    let out = flowguard(
        w.path(),
        &[
            "run", "--input", "syn/data.csv", "--config", "cfg.json", "--seed", "2", "--train-fraction", "0.7",
            "--voting", "hard", "--eta", "0.4", "--out", "r",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&w.path().join("r/run_report.json"));
    assert_eq!(report["config"]["train_fraction"], 0.7);
    assert_eq!(report["config"]["hyperparameters"]["voting"], "hard");
    assert_eq!(report["config"]["preprocess"]["attack_ratio"], 0.4);
    assert_eq!(report["config"]["hyperparameters"]["rf_n_trees"], 8);
}
