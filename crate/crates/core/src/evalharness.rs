//! End-to-end runs: single pipeline, voting comparison, attack-ratio sweep and
//! k-fold cross-validation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::featstats::{prefilter, score_features, FeatureScore, MadKsConfig};
use crate::flowdata::{split_train_test, ClassCounts, FlowDataset, Samples, ATTACK, NORMAL};
use crate::metrics::{self, compute_metrics, confusion, kfold_cv, CvSummary, MetricsReport};
use crate::models::{Ensemble, Hyperparameters, Voting};
use crate::num::{median, Real};
use crate::preprocess::{apply_preprocess, fit_preprocess, PreprocessOptions, PreprocessReport, PreprocessState};
use crate::rng::{self, tag};
use crate::selector::{select_features, EagleParams, FeatureMask, GaParams, GenerationStats};
use crate::tuner::{tune, ParamSpace, SaParams, TracePoint};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrefilterConfig {
    pub enabled: bool,
    /// Columns kept after scoring; `None` keeps all of them.
    pub keep_top: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub enabled: bool,
    pub ga: GaParams,
    pub eagle: EagleParams,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            ga: GaParams::default(),
            eagle: EagleParams::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    pub enabled: bool,
    pub space: ParamSpace,
    pub sa: SaParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub preprocess: PreprocessOptions,
    pub prefilter: PrefilterConfig,
    pub mad_ks: MadKsConfig,
    pub selection: SelectionConfig,
    pub tuner: TunerConfig,
    /// Used directly when tuning is off; the fixed part of the space otherwise.
    pub hyperparameters: Hyperparameters,
    pub train_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessOptions::default(),
            prefilter: PrefilterConfig::default(),
            mad_ks: MadKsConfig::default(),
            selection: SelectionConfig::default(),
            tuner: TunerConfig::default(),
            hyperparameters: Hyperparameters::default(),
            train_fraction: 0.8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "train_fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        if self.selection.enabled {
            self.selection.ga.validate()?;
            self.selection.eagle.validate()?;
        }
        if self.tuner.enabled {
            self.tuner.space.validate()?;
            self.tuner.sa.validate()?;
        }
        self.hyperparameters.validate()
    }
}

/// Wall-clock seconds per phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub preprocess: f64,
    pub featstats: f64,
    pub select: f64,
    pub tune: f64,
    pub train: f64,
    pub evaluate: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub fingerprint: String,
    pub n_rows: usize,
    pub class_counts: ClassCounts,
}

impl DatasetSummary {
    pub fn of<T: Real>(ds: &FlowDataset<T>) -> Self {
        Self {
            source: ds.provenance().source.clone(),
            fingerprint: ds.fingerprint(),
            n_rows: ds.n_rows(),
            class_counts: ds.class_counts(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VotingMetrics {
    pub hard: MetricsReport,
    pub soft: MetricsReport,
}

impl VotingMetrics {
    pub fn get(&self, voting: Voting) -> &MetricsReport {
        match voting {
            Voting::Hard => &self.hard,
            Voting::Soft => &self.soft,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub seed: u64,
    pub dataset: DatasetSummary,
    pub train_preprocess: PreprocessReport,
    pub test_preprocess: PreprocessReport,
    /// Model input columns after encoding.
    pub feature_names: Vec<String>,
    pub feature_scores: Vec<FeatureScore>,
    pub prefilter_mask: Option<FeatureMask>,
    pub selected_mask: FeatureMask,
    pub selected_features: Vec<String>,
    pub fitness_history: Vec<GenerationStats>,
    pub hyperparameters: Hyperparameters,
    pub tuning_trace: Vec<TracePoint>,
    pub metrics: VotingMetrics,
    pub model_fingerprint: String,
    pub timings: PhaseTimings,
}

impl RunReport {
    /// Metrics for the configured voting mode.
    pub fn primary_metrics(&self) -> &MetricsReport {
        self.metrics.get(self.hyperparameters.voting)
    }
}

/// Everything needed to score new raw data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModelBundle<T> {
    pub version: u32,
    pub preprocess_options: PreprocessOptions,
    pub preprocess: PreprocessState<T>,
    pub ensemble: Ensemble<T>,
}

impl<T: Real> ModelBundle<T> {
    pub fn fingerprint(&self) -> Result<String> {
        fingerprint_json(&self.ensemble)
    }

    /// Preprocesses `ds` with the stored state and predicts each row.
    pub fn predict(&self, ds: &FlowDataset<T>, voting: Voting) -> Result<(Vec<usize>, Vec<u8>)> {
        let (test, _) = apply_preprocess(ds, &self.preprocess, &self.preprocess_options)?;
        let samples = test.to_samples()?;
        Ok((self.ensemble.predict_all(&samples, voting)?, samples.labels().to_vec()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let bundle: Self = serde_json::from_reader(std::io::BufReader::new(f))?;
        if bundle.version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                bundle.version
            )));
        }
        Ok(bundle)
    }
}

pub fn fingerprint_json<S: Serialize>(value: &S) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// A trained pipeline plus its processed held-out set.
pub struct Trained<T> {
    pub report: RunReport,
    pub bundle: ModelBundle<T>,
    pub train: Samples<T>,
    pub test: Samples<T>,
}

fn timed<R>(slot: &mut f64, f: impl FnOnce() -> R) -> R {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// Labels of every row under both voting modes, from one pass of base predictions.
fn predict_both<T: Real>(model: &Ensemble<T>, samples: &Samples<T>) -> Result<(Vec<usize>, Vec<usize>)> {
    let pairs: Vec<(usize, usize)> = (0..samples.n_rows())
        .into_par_iter()
        .map(|r| {
            let base = model.base_predictions(samples.row(r))?;
            Ok((base.combine(Voting::Hard)?.0, base.combine(Voting::Soft)?.0))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// A pipeline fitted on one training set, before any evaluation.
pub struct FittedPipeline<T> {
    pub bundle: ModelBundle<T>,
    /// Processed training rows the ensemble was fit on.
    pub train: Samples<T>,
    pub train_preprocess: PreprocessReport,
    pub feature_scores: Vec<FeatureScore>,
    pub prefilter_mask: Option<FeatureMask>,
    pub selected_mask: FeatureMask,
    pub fitness_history: Vec<GenerationStats>,
    pub hyperparameters: Hyperparameters,
    pub tuning_trace: Vec<TracePoint>,
    pub timings: PhaseTimings,
}

impl<T> FittedPipeline<T> {
    pub fn selected_features(&self) -> Vec<String> {
        let names = &self.bundle.preprocess.feature_names;
        self.selected_mask.selected().into_iter().map(|i| names[i].clone()).collect()
    }
}

/// Feature scores on processed training rows, plus the prefilter mask when enabled.
pub fn score_stage<T: Real>(train: &Samples<T>, config: &PipelineConfig) -> Result<(Vec<FeatureScore>, Option<FeatureMask>)> {
    let d = train.n_features();
    let scores = score_features(train, &config.mad_ks)?;
    let mask = if config.prefilter.enabled {
        Some(prefilter(&scores, config.prefilter.keep_top.unwrap_or(d).min(d))?)
    } else {
        None
    };
    Ok((scores, mask))
}

/// Runs the wrapper search over the columns allowed by `prefilter_mask`.
///
/// With selection off, or fewer than two candidate columns, every candidate
/// is kept and the history is empty.
pub fn select_stage<T: Real>(
    train: &Samples<T>,
    prefilter_mask: Option<&FeatureMask>,
    config: &PipelineConfig,
    seed: u64,
) -> Result<(FeatureMask, Vec<GenerationStats>)> {
    let d = train.n_features();
    let columns: Vec<usize> = prefilter_mask.map_or_else(|| (0..d).collect(), FeatureMask::selected);
    let mut bits = vec![false; d];
    if !config.selection.enabled || columns.len() < 2 {
        columns.iter().for_each(|&c| bits[c] = true);
        return Ok((FeatureMask::new(bits)?, Vec::new()));
    }
    let projected = train.project(&columns);
    let (sub, history) = select_features(&projected, &config.selection.ga, &config.selection.eagle, seed)?;
    for (&c, &b) in columns.iter().zip(sub.bits()) {
        bits[c] = b;
    }
    Ok((FeatureMask::new(bits)?, history))
}

/// Preprocessing, scoring, selection, tuning and training on `train_raw`.
pub fn fit_pipeline<T: Real>(train_raw: &FlowDataset<T>, config: &PipelineConfig, seed: u64) -> Result<FittedPipeline<T>> {
    config.validate()?;
    let started = Instant::now();
    let mut t = PhaseTimings::default();

    let (train, state, train_rep) = timed(&mut t.preprocess, || -> Result<_> {
        let (train, state, rep) = fit_preprocess(train_raw, &config.preprocess, seed)?;
        Ok((train.to_samples()?, state, rep))
    })
    .map_err(|e| e.in_phase("preprocess"))?;

    let (scores, pre_mask) =
        timed(&mut t.featstats, || score_stage(&train, config)).map_err(|e| e.in_phase("featstats"))?;
    let (mask, history) = timed(&mut t.select, || select_stage(&train, pre_mask.as_ref(), config, seed))
        .map_err(|e| e.in_phase("select"))?;

    let (hp, trace) = timed(&mut t.tune, || -> Result<_> {
        if !config.tuner.enabled {
            return Ok((config.hyperparameters.clone(), Vec::new()));
        }
        let space = ParamSpace {
            base: config.hyperparameters.clone(),
            ..config.tuner.space.clone()
        };
        tune(&train, &mask, &space, &config.tuner.sa, seed)
    })
    .map_err(|e| e.in_phase("tune"))?;

    let model = timed(&mut t.train, || Ensemble::fit(&train, &mask, &hp, seed)).map_err(|e| e.in_phase("train"))?;
    t.total = started.elapsed().as_secs_f64();

    Ok(FittedPipeline {
        bundle: ModelBundle {
            version: MODEL_FORMAT_VERSION,
            preprocess_options: config.preprocess.clone(),
            preprocess: state,
            ensemble: model,
        },
        train,
        train_preprocess: train_rep,
        feature_scores: scores,
        prefilter_mask: pre_mask,
        selected_mask: mask,
        fitness_history: history,
        hyperparameters: hp,
        tuning_trace: trace,
        timings: t,
    })
}

/// Fits the pipeline on `train_raw` and evaluates on `test_raw`.
pub fn fit_and_evaluate<T: Real>(
    train_raw: &FlowDataset<T>,
    test_raw: &FlowDataset<T>,
    config: &PipelineConfig,
    seed: u64,
    dataset: DatasetSummary,
) -> Result<Trained<T>> {
    let fitted = fit_pipeline(train_raw, config, seed)?;
    let mut t = fitted.timings.clone();
    let started = Instant::now();

    let (test, test_rep) = timed(&mut t.evaluate, || -> Result<_> {
        let (test, rep) = apply_preprocess(test_raw, &fitted.bundle.preprocess, &config.preprocess)?;
        Ok((test.to_samples()?, rep))
    })
    .map_err(|e| e.in_phase("preprocess"))?;
    let mut eval_secs = 0.0;
    let metrics = timed(&mut eval_secs, || -> Result<_> {
        let (hard, soft) = predict_both(&fitted.bundle.ensemble, &test)?;
        Ok(VotingMetrics {
            hard: metrics::evaluate(&hard, test.labels())?,
            soft: metrics::evaluate(&soft, test.labels())?,
        })
    })
    .map_err(|e| e.in_phase("evaluate"))?;
    t.evaluate += eval_secs;
    t.total += started.elapsed().as_secs_f64();

    let report = RunReport {
        config: config.clone(),
        seed,
        dataset,
        train_preprocess: fitted.train_preprocess.clone(),
        test_preprocess: test_rep,
        feature_names: fitted.bundle.preprocess.feature_names.clone(),
        selected_features: fitted.selected_features(),
        feature_scores: fitted.feature_scores,
        prefilter_mask: fitted.prefilter_mask,
        selected_mask: fitted.selected_mask,
        fitness_history: fitted.fitness_history,
        hyperparameters: fitted.hyperparameters,
        tuning_trace: fitted.tuning_trace,
        metrics,
        model_fingerprint: fitted.bundle.fingerprint()?,
        timings: t,
    };
    Ok(Trained {
        report,
        bundle: fitted.bundle,
        train: fitted.train,
        test,
    })
}

/// Stratified split, then [`fit_and_evaluate`].
pub fn run_pipeline_trained<T: Real>(ds: &FlowDataset<T>, config: &PipelineConfig, seed: u64) -> Result<Trained<T>> {
    config.validate()?;
    let (train, test) = split_train_test(ds, config.train_fraction, seed).map_err(|e| e.in_phase("split"))?;
    fit_and_evaluate(&train, &test, config, seed, DatasetSummary::of(ds))
}

pub fn run_pipeline<T: Real>(ds: &FlowDataset<T>, config: &PipelineConfig, seed: u64) -> Result<RunReport> {
    run_pipeline_trained(ds, config, seed).map(|t| t.report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VotingComparison {
    pub seed: u64,
    pub hard: MetricsReport,
    pub soft: MetricsReport,
    /// Model fingerprint taken before the hard and after the soft evaluation.
    pub fingerprint_before: String,
    pub fingerprint_after: String,
    /// Test rows on which all three base models agree.
    pub unanimous_rows: usize,
    pub test_rows: usize,
}

impl VotingComparison {
    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        write_voting_table(std::slice::from_ref(self), writer)
    }
}

/// Rows of `seed, voting, accuracy, detection_rate, fpr`.
pub fn write_voting_table<W: Write>(runs: &[VotingComparison], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["seed", "voting", "accuracy", "detection_rate", "fpr"])?;
    let cell = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"));
    for run in runs {
        for (mode, r) in [("hard", &run.hard), ("soft", &run.soft)] {
            w.write_record([
                run.seed.to_string(),
                mode.to_string(),
                cell(r.accuracy),
                cell(r.detection_rate),
                cell(r.fpr),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<voting table>", e))?;
    Ok(())
}

/// Trains once and scores the same models under hard and soft voting.
pub fn compare_voting<T: Real>(ds: &FlowDataset<T>, config: &PipelineConfig, seed: u64) -> Result<VotingComparison> {
    let trained = run_pipeline_trained(ds, config, seed)?;
    let model = &trained.bundle.ensemble;
    let fingerprint_before = fingerprint_json(model)?;
    let test = &trained.test;
    let mut hard = Vec::with_capacity(test.n_rows());
    let mut soft = Vec::with_capacity(test.n_rows());
    let mut unanimous = 0;
    for r in 0..test.n_rows() {
        let base = model.base_predictions(test.row(r))?;
        if base.labels.iter().all(|&l| l == base.labels[0]) {
            unanimous += 1;
        }
        hard.push(base.combine(Voting::Hard)?.0);
        soft.push(base.combine(Voting::Soft)?.0);
    }
    Ok(VotingComparison {
        seed,
        hard: metrics::evaluate(&hard, test.labels())?,
        soft: metrics::evaluate(&soft, test.labels())?,
        fingerprint_before,
        fingerprint_after: fingerprint_json(model)?,
        unanimous_rows: unanimous,
        test_rows: test.n_rows(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub eta_values: Vec<f64>,
    pub at_risk_fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    /// How far injected rows move from their normal position toward the
    /// attack class centre (0 = unchanged, 1 = all the way).
    pub drift: f64,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eta_values: vec![0.2, 0.3, 0.4, 0.5],
            at_risk_fractions: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            seeds: vec![1, 2, 3],
            drift: 0.5,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: &f64| *v > 0.0 && *v < 1.0;
        if self.eta_values.is_empty() || !self.eta_values.iter().all(in_unit) {
            return Err(Error::Parameter("eta_values must be non-empty and inside (0, 1)".into()));
        }
        if self.at_risk_fractions.is_empty() || !self.at_risk_fractions.iter().all(in_unit) {
            return Err(Error::Parameter("at_risk_fractions must be non-empty and inside (0, 1)".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("at least one seed is required".into()));
        }
        if !(0.0..=1.0).contains(&self.drift) {
            return Err(Error::Parameter(format!("drift {} outside [0, 1]", self.drift)));
        }
        self.pipeline.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub eta: f64,
    pub at_risk_fraction: f64,
    pub seed: u64,
    pub detection_rate: Option<f64>,
    pub injected_rows: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    /// Mean detection rate over seeds for one `(eta, fraction)` cell.
    pub fn mean(&self, eta: f64, fraction: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.eta == eta && c.at_risk_fraction == fraction)
            .filter_map(|c| c.detection_rate)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean detection rate over every fraction and seed at `eta`.
    pub fn mean_for_eta(&self, eta: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.eta == eta)
            .filter_map(|c| c.detection_rate)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["eta", "at_risk_fraction", "seed", "detection_rate", "injected_rows", "error"])?;
        for c in &self.cells {
            w.write_record([
                c.eta.to_string(),
                c.at_risk_fraction.to_string(),
                c.seed.to_string(),
                c.detection_rate.map_or_else(|| "undefined".into(), |x| format!("{x:.6}")),
                c.injected_rows.to_string(),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<sweep table>", e))?;
        Ok(())
    }
}

/// Per-column class medians of the processed training data.
fn class_medians<T: Real>(s: &Samples<T>, class: u8) -> Vec<T> {
    (0..s.n_features())
        .map(|j| {
            let v: Vec<T> = (0..s.n_rows())
                .filter(|&r| s.labels()[r] == class)
                .map(|r| s.value(r, j))
                .collect();
            median(&v).unwrap_or_else(T::zero)
        })
        .collect()
}

/// Moves a random `fraction` of the normal test rows by `drift` of the way
/// from the normal to the attack class median and relabels them as attacks.
pub fn inject_attack_drift<T: Real>(
    test: &Samples<T>,
    train: &Samples<T>,
    fraction: f64,
    drift: f64,
    seed: u64,
) -> Result<(Samples<T>, usize)> {
    let normal_rows: Vec<usize> = (0..test.n_rows()).filter(|&r| test.labels()[r] == NORMAL).collect();
    let m = (fraction * normal_rows.len() as f64).round() as usize;
    let mut rng = rng::stream(seed, &[tag::INJECT, fraction.to_bits(), drift.to_bits()]);
    let chosen: Vec<usize> = index::sample(&mut rng, normal_rows.len(), m)
        .into_iter()
        .map(|i| normal_rows[i])
        .collect();
    let mn = class_medians(train, NORMAL);
    let ma = class_medians(train, ATTACK);
    let shift: Vec<T> = mn.iter().zip(&ma).map(|(n, a)| T::lit(drift) * (*a - *n)).collect();
    let d = test.n_features();
    let mut x = Vec::with_capacity(test.n_rows() * d);
    for r in 0..test.n_rows() {
        x.extend_from_slice(test.row(r));
    }
    let mut y = test.labels().to_vec();
    for &r in &chosen {
        for j in 0..d {
            x[r * d + j] += shift[j];
        }
        y[r] = ATTACK;
    }
    Ok((Samples::new(x, y, d)?, m))
}

/// Detection rate over the grid of training attack ratios and at-risk fractions.
///
/// Each `(eta, seed)` trains once with SMOTE off and the training set
/// resampled to `eta`; every at-risk fraction then reuses that model. A failed
/// training marks all its cells with the error and the sweep continues.
pub fn sweep_detection_rate<T: Real>(ds: &FlowDataset<T>, exp: &ExperimentConfig) -> Result<SweepResult> {
    exp.validate()?;
    let jobs: Vec<(f64, u64)> = exp
        .eta_values
        .iter()
        .flat_map(|&e| exp.seeds.iter().map(move |&s| (e, s)))
        .collect();
    let blocks: Vec<Vec<SweepCell>> = jobs
        .par_iter()
        .map(|&(eta, seed)| {
            let mut cfg = exp.pipeline.clone();
            cfg.preprocess.attack_ratio = Some(eta);
            cfg.preprocess.smote = false;
            let trained = run_pipeline_trained(ds, &cfg, seed);
            exp.at_risk_fractions
                .iter()
                .map(|&r| {
                    let cell = |dr, injected, error| SweepCell {
                        eta,
                        at_risk_fraction: r,
                        seed,
                        detection_rate: dr,
                        injected_rows: injected,
                        error,
                    };
                    let t = match &trained {
                        Ok(t) => t,
                        Err(e) => return cell(None, 0, Some(e.to_string())),
                    };
                    let outcome = inject_attack_drift(&t.test, &t.train, r, exp.drift, seed).and_then(|(s, m)| {
                        let pred = t.bundle.ensemble.predict_all(&s, cfg.hyperparameters.voting)?;
                        Ok((compute_metrics(&confusion(&pred, s.labels())?)?.detection_rate, m))
                    });
                    match outcome {
                        Ok((dr, m)) => cell(dr, m, None),
                        Err(e) => cell(None, 0, Some(e.to_string())),
                    }
                })
                .collect()
        })
        .collect();
    Ok(SweepResult {
        cells: blocks.concat(),
    })
}

/// Stratified k-fold cross-validation of the whole pipeline; each fold's
/// metrics use the configured voting mode.
pub fn cross_validate<T: Real>(ds: &FlowDataset<T>, k: usize, config: &PipelineConfig, seed: u64) -> Result<CvSummary> {
    config.validate()?;
    kfold_cv(ds.labels(), k, seed, |train, test, fold| {
        let fold_seed = rng::derive_seed(seed, &[tag::FOLDS, fold as u64]);
        let t = fit_and_evaluate(
            &ds.subset(train),
            &ds.subset(test),
            config,
            fold_seed,
            DatasetSummary::of(ds),
        )?;
        Ok(t.report.primary_metrics().clone())
    })
}

/// Flat per-voting-mode map, handy for JSON reports.
pub fn metrics_by_mode(m: &VotingMetrics) -> BTreeMap<String, MetricsReport> {
    [("hard".to_string(), m.hard.clone()), ("soft".to_string(), m.soft.clone())]
        .into_iter()
        .collect()
}
