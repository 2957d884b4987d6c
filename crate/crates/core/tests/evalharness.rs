use flowguard::evalharness::{
    compare_voting, cross_validate, inject_attack_drift, run_pipeline, run_pipeline_trained, sweep_detection_rate,
    write_voting_table, ExperimentConfig, ModelBundle, PipelineConfig,
};
use flowguard::flowdata::synth_generate;
use flowguard::models::{Hyperparameters, Voting};
use flowguard::{Error, FlowDataset};

fn data(seed: u64) -> FlowDataset {
    synth_generate(240, 80, 3, 5, seed).unwrap()
}

fn quick() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.selection.ga.population_size = 8;
    c.selection.ga.generations = 4;
    c.hyperparameters = Hyperparameters {
        rf_n_trees: 15,
        gbt_n_rounds: 20,
        ..Default::default()
    };
    c
}

#[test]
fn same_seed_same_report() {
    let ds = data(1);
    let mut a = run_pipeline(&ds, &quick(), 5).unwrap();
    let mut b = run_pipeline(&ds, &quick(), 5).unwrap();
    a.timings = Default::default();
    b.timings = Default::default();
    assert_eq!(a, b);
    assert_eq!(a.fitness_history.len(), 5);
    assert_eq!(a.selected_features.len(), a.selected_mask.count());
}

#[test]
fn prefilter_keeping_everything_changes_nothing() {
    let ds = data(2);
    let mut base = quick();
    base.selection.enabled = false;
    let mut keep = base.clone();
    keep.prefilter.enabled = true;
    let plain = run_pipeline(&ds, &base, 3).unwrap();
    let all = run_pipeline(&ds, &keep, 3).unwrap();
    assert_eq!(plain.selected_mask, all.selected_mask);
    assert_eq!(plain.metrics, all.metrics);
    assert_eq!(plain.model_fingerprint, all.model_fingerprint);

    keep.prefilter.keep_top = Some(2);
    let top = run_pipeline(&ds, &keep, 3).unwrap();
    assert_eq!(top.selected_mask.count(), 2);
    let best: Vec<usize> = top.feature_scores.iter().take(2).map(|s| s.column_index).collect();
    assert!(best.iter().all(|&c| top.selected_mask.bits()[c]));
}

#[test]
fn voting_comparison_reuses_one_model() {
    let ds = data(3);
    let mut runs = Vec::new();
    for seed in 1..=3 {
        let v = compare_voting(&ds, &quick(), seed).unwrap();
        assert_eq!(v.fingerprint_before, v.fingerprint_after);
        assert!(v.unanimous_rows <= v.test_rows);
        assert!(v.soft.accuracy.unwrap() >= v.hard.accuracy.unwrap() - 0.01);
        runs.push(v);
    }
    let mut buf = Vec::new();
    write_voting_table(&runs, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("seed,voting,accuracy,detection_rate,fpr"));
}

#[test]
fn saved_bundle_scores_like_the_original() {
    let ds = data(4);
    let t = run_pipeline_trained(&ds, &quick(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    t.bundle.save(&path).unwrap();
    let back = ModelBundle::load(&path).unwrap();
    assert_eq!(back.fingerprint().unwrap(), t.report.model_fingerprint);
    let (a, _) = t.bundle.predict(&ds, Voting::Soft).unwrap();
    let (b, _) = back.predict(&ds, Voting::Soft).unwrap();
    assert_eq!(a, b);
}

#[test]
fn injection_moves_only_normal_rows() {
    let ds = data(5);
    let t = run_pipeline_trained(&ds, &quick(), 2).unwrap();
    let normals = t.test.labels().iter().filter(|&&l| l == 0).count();
    let (moved, m) = inject_attack_drift(&t.test, &t.train, 0.5, 0.5, 2).unwrap();
    assert_eq!(m, (0.5 * normals as f64).round() as usize);
    let attacks = moved.labels().iter().filter(|&&l| l == 1).count();
    assert_eq!(attacks, t.test.n_rows() - normals + m);
    let (same, m0) = inject_attack_drift(&t.test, &t.train, 0.5, 0.0, 2).unwrap();
    assert_eq!(m0, m);
    for r in 0..same.n_rows() {
        assert_eq!(same.row(r), t.test.row(r));
    }
}

#[test]
fn sweep_covers_the_grid() {
    let ds = data(6);
    let exp = ExperimentConfig {
        eta_values: vec![0.2, 0.5],
        at_risk_fractions: vec![0.2, 0.7],
        seeds: vec![1, 2],
        pipeline: quick(),
        ..Default::default()
    };
    let res = sweep_detection_rate(&ds, &exp).unwrap();
    assert_eq!(res.cells.len(), 8);
    for c in &res.cells {
        assert!(c.error.is_none());
        let dr = c.detection_rate.unwrap();
        assert!((0.0..=1.0).contains(&dr));
    }
    for eta in [0.2, 0.5] {
        assert!(res.mean(eta, 0.7).unwrap() < res.mean(eta, 0.2).unwrap());
    }

    // A cell does not depend on which other cells share the sweep.
    let single = ExperimentConfig {
        eta_values: vec![0.5],
        at_risk_fractions: vec![0.7],
        seeds: vec![2],
        ..exp.clone()
    };
    let one = sweep_detection_rate(&ds, &single).unwrap();
    let twin = res.cells.iter().find(|c| c.eta == 0.5 && c.at_risk_fraction == 0.7 && c.seed == 2).unwrap();
    assert_eq!(&one.cells[0], twin);

    let mut buf = Vec::new();
    res.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
}

#[test]
fn cross_validation_summaries() {
    let ds = data(7);
    let mut cfg = quick();
    cfg.selection.enabled = false;
    let cv = cross_validate(&ds, 4, &cfg, 11).unwrap();
    assert_eq!(cv.per_fold.len(), 4);
    let acc: Vec<f64> = cv.per_fold.iter().map(|r| r.accuracy.unwrap()).collect();
    let mean = acc.iter().sum::<f64>() / 4.0;
    assert!((cv.mean("accuracy").unwrap() - mean).abs() < 1e-12);
    assert!(cv.std("accuracy").unwrap() >= 0.0);
}

#[test]
fn bad_configuration_is_rejected() {
    let ds = data(8);
    let cfg = PipelineConfig { train_fraction: 1.0, ..quick() };
    assert!(matches!(run_pipeline(&ds, &cfg, 1), Err(Error::Parameter(_))));
    let exp = ExperimentConfig { eta_values: vec![], ..Default::default() };
    assert!(matches!(sweep_detection_rate(&ds, &exp), Err(Error::Parameter(_))));
}
