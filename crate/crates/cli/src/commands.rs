//! One function per subcommand.

use flowguard::evalharness::{
    compare_voting as compare_voting_runs, cross_validate, fit_pipeline, metrics_by_mode, run_pipeline_trained,
    score_stage, select_stage, sweep_detection_rate, write_voting_table, DatasetSummary, PipelineConfig,
};
use flowguard::flowdata::{inject_missing, read_csv, synth_generate, write_csv_to, SchemaMapping};
use flowguard::metrics;
use flowguard::preprocess::fit_preprocess;
use flowguard::selector::{FeatureMask, GenerationStats};
use flowguard::tuner::{self, ParamSpace, TracePoint};
use flowguard::{FlowDataset, ModelBundle, Samples};
use log::info;
use serde::Serialize;

use crate::config::{seed_series, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::output::{sha256_hex, InputEntry, OutDir};
use crate::{
    Common, CvArgs, DataCommand, EvaluateArgs, Input, PipelineFlags, RepeatArgs, SynthArgs, TuneArgs,
};

struct Session {
    file: ConfigFile,
    seed: u64,
    seed_source: &'static str,
    out: OutDir,
    inputs: Vec<InputEntry>,
}

impl Session {
    fn start(common: &Common) -> CliResult<Self> {
        let file = ConfigFile::load(common.config.as_deref())?;
        let mut inputs = Vec::new();
        if let Some(p) = &common.config {
            inputs.push(hash_input(p)?);
        }
        let (seed, seed_source) = match (common.seed, file.seed) {
            (Some(s), _) => (s, "flag"),
            (None, Some(s)) => (s, "config"),
            (None, None) => {
                let s = rand::random::<u64>();
                info!("no seed given, using {s}");
                (s, "random")
            }
        };
        Ok(Self {
            file,
            seed,
            seed_source,
            out: OutDir::create(&common.out)?,
            inputs,
        })
    }

    fn load(&mut self, input: &Input) -> CliResult<FlowDataset> {
        let mapping = match &input.schema {
            Some(p) => {
                self.inputs.push(hash_input(p)?);
                SchemaMapping::from_json_file(p)?
            }
            None => self.file.schema.clone().unwrap_or_default(),
        };
        let bytes = std::fs::read(&input.input).map_err(|e| flowguard::Error::io(&input.input, e))?;
        self.inputs.push(InputEntry {
            path: input.input.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        let ds: FlowDataset = read_csv(bytes.as_slice(), &mapping)?;
        let ds = ds.with_source(input.input.display().to_string());
        let c = ds.class_counts();
        info!("loaded {} rows ({} normal, {} attack)", ds.n_rows(), c.normal, c.attack);
        Ok(ds)
    }

    fn pipeline(&self, flags: &PipelineFlags) -> CliResult<PipelineConfig> {
        let mut p = self.file.pipeline.clone();
        if let Some(eta) = flags.eta {
            p.preprocess.attack_ratio = Some(eta);
        }
        if let Some(f) = flags.train_fraction {
            p.train_fraction = f;
        }
        if let Some(k) = flags.keep_top {
            p.prefilter.enabled = true;
            p.prefilter.keep_top = Some(k);
        }
        if let Some(v) = flags.voting {
            p.hyperparameters.voting = v.into();
        }
        p.validate()?;
        Ok(p)
    }

    fn finish(self, command: &str) -> CliResult<()> {
        info!("wrote results (seed {})", self.seed);
        self.out.finish(command, self.seed, self.seed_source, self.inputs)
    }
}

fn hash_input(path: &std::path::Path) -> CliResult<InputEntry> {
    let bytes = std::fs::read(path).map_err(|e| flowguard::Error::io(path, e))?;
    Ok(InputEntry {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

fn csv_bytes<R, I>(header: &[&str], rows: I) -> CliResult<Vec<u8>>
where
    R: IntoIterator<Item = String>,
    I: IntoIterator<Item = R>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::internal("csv", e))?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::internal("csv", e))?;
    }
    w.into_inner().map_err(|e| CliError::internal("csv", e))
}

/// Strips the wall-clock block so equal runs give equal bytes.
fn without_timings<S: Serialize>(value: &S) -> CliResult<serde_json::Value> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::internal("report", e))?;
    if let Some(map) = v.as_object_mut() {
        map.remove("timings");
    }
    Ok(v)
}

fn preprocessed(s: &Session, ds: &FlowDataset, pipeline: &PipelineConfig) -> CliResult<(Samples, Vec<String>)> {
    let (train, state, _) = fit_preprocess(ds, &pipeline.preprocess, s.seed)?;
    Ok((train.to_samples()?, state.feature_names))
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    let mut s = Session::start(&a.common)?;
    let mut cfg = s.file.synth.clone();
    cfg.n_normal = a.normal.unwrap_or(cfg.n_normal);
    cfg.n_attack = a.attack.unwrap_or(cfg.n_attack);
    cfg.informative = a.informative.unwrap_or(cfg.informative);
    cfg.noise = a.noise.unwrap_or(cfg.noise);
    cfg.missing_rate = a.missing_rate.unwrap_or(cfg.missing_rate);
    let mut ds: FlowDataset = synth_generate(cfg.n_normal, cfg.n_attack, cfg.informative, cfg.noise, s.seed)?;
    if cfg.missing_rate > 0.0 {
        ds = inject_missing(&ds, cfg.missing_rate, s.seed)?;
    }
    let mut bytes = Vec::new();
    write_csv_to(&ds, &mut bytes)?;
    s.out.write("data.csv", &bytes)?;
    s.out.write_json("schema.json", &SchemaMapping::for_dataset(&ds))?;
    s.finish("synth")
}

pub fn preprocess(a: DataCommand) -> CliResult<()> {
    let mut s = Session::start(&a.common)?;
    let ds = s.load(&a.input)?;
    let pipeline = s.pipeline(&a.pipeline)?;
    let (processed, state, report) = fit_preprocess(&ds, &pipeline.preprocess, s.seed)?;
    let mut bytes = Vec::new();
    write_csv_to(&processed, &mut bytes)?;
    s.out.write("processed.csv", &bytes)?;
    s.out.write_json("preprocess_state.json", &state)?;
    s.out.write_json("preprocess_report.json", &report)?;
    s.finish("preprocess")
}

pub fn score(a: DataCommand) -> CliResult<()> {
    let mut s = Session::start(&a.common)?;
    let ds = s.load(&a.input)?;
    let pipeline = s.pipeline(&a.pipeline)?;
    let (train, names) = preprocessed(&s, &ds, &pipeline)?;
    let (scores, mask) = score_stage(&train, &pipeline)?;
    let rows = scores.iter().enumerate().map(|(rank, f)| {
        [
            (rank + 1).to_string(),
            f.column_index.to_string(),
            names[f.column_index].clone(),
            format!("{:.12}", f.score),
        ]
    });
    let table = csv_bytes(&["rank", "column_index", "feature", "score"], rows)?;
    s.out.write("scores.csv", &table)?;
    if let Some(mask) = mask {
        s.out.write_json("prefilter_mask.json", &mask)?;
    }
    s.finish("score")
}

#[derive(Serialize)]
struct SelectionOutput<'a> {
    feature_names: &'a [String],
    prefilter_mask: Option<&'a FeatureMask>,
    selected_mask: &'a FeatureMask,
    selected_features: Vec<String>,
    fitness_history: &'a [GenerationStats],
}

pub fn select(a: DataCommand) -> CliResult<()> {
    let mut s = Session::start(&a.common)?;
    let ds = s.load(&a.input)?;
    let pipeline = s.pipeline(&a.pipeline)?;
    let (train, names) = preprocessed(&s, &ds, &pipeline)?;
    let (_, pre) = score_stage(&train, &pipeline)?;
    let (mask, history) = select_stage(&train, pre.as_ref(), &pipeline, s.seed)?;
    let out = SelectionOutput {
        feature_names: &names,
        prefilter_mask: pre.as_ref(),
        selected_mask: &mask,
        selected_features: mask.selected().into_iter().map(|i| names[i].clone()).collect(),
        fitness_history: &history,
    };
    s.out.write_json("selection.json", &out)?;
    let rows = history.iter().map(|g| {
        [
            g.generation.to_string(),
            format!("{:.12}", g.best_fitness),
            format!("{:.12}", g.mean_fitness),
            g.n_selected.to_string(),
        ]
    });
    let table = csv_bytes(&["generation", "best_fitness", "mean_fitness", "n_selected"], rows)?;
    s.out.write("fitness_history.csv", &table)?;
    s.finish("select")
}

fn read_mask(path: &std::path::Path, n_features: usize) -> CliResult<FeatureMask> {
    let text = std::fs::read_to_string(path).map_err(|e| flowguard::Error::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(inner) = value.get_mut("selected_mask") {
        value = inner.take();
    }
    let mask: FeatureMask = serde_json::from_value(value)?;
    if mask.len() != n_features {
        return Err(flowguard::Error::Shape(format!("mask has {} bits for {n_features} features", mask.len())).into());
    }
    Ok(mask)
}

#[derive(Serialize)]
struct TuningOutput<'a> {
    selected_mask: &'a FeatureMask,
    hyperparameters: &'a flowguard::models::Hyperparameters,
    trace: &'a [TracePoint],
}

pub fn tune(a: TuneArgs) -> CliResult<()> {
    let mut s = Session::start(&a.data.common)?;
    let ds = s.load(&a.data.input)?;
    let pipeline = s.pipeline(&a.data.pipeline)?;
    let (train, _) = preprocessed(&s, &ds, &pipeline)?;
    let mask = match &a.mask {
        Some(p) => {
            s.inputs.push(hash_input(p)?);
            read_mask(p, train.n_features())?
        }
        None => FeatureMask::all(train.n_features())?,
    };
    let space = ParamSpace {
        base: pipeline.hyperparameters.clone(),
        ..pipeline.tuner.space.clone()
    };
    pipeline.tuner.sa.validate()?;
    let (hp, trace) = tuner::tune(&train, &mask, &space, &pipeline.tuner.sa, s.seed)?;
    s.out.write_json(
        "tuning.json",
        &TuningOutput {
            selected_mask: &mask,
            hyperparameters: &hp,
            trace: &trace,
        },
    )?;
    let rows = trace.iter().map(|t| {
        [
            t.iteration.to_string(),
            format!("{:.12}", t.best_fitness),
            format!("{:.12}", t.temperature),
        ]
    });
    let table = csv_bytes(&["iteration", "best_fitness", "temperature"], rows)?;
    s.out.write("tuning_trace.csv", &table)?;
    s.finish("tune")
}

#[derive(Serialize)]
struct TrainReport<'a> {
    config: &'a PipelineConfig,
    seed: u64,
    dataset: DatasetSummary,
    train_preprocess: &'a flowguard::preprocess::PreprocessReport,
    feature_names: &'a [String],
    feature_scores: &'a [flowguard::featstats::FeatureScore],
    prefilter_mask: Option<&'a FeatureMask>,
    selected_mask: &'a FeatureMask,
    selected_features: Vec<String>,
    fitness_history: &'a [GenerationStats],
    hyperparameters: &'a flowguard::models::Hyperparameters,
    tuning_trace: &'a [TracePoint],
    model_fingerprint: String,
}

pub fn train(a: DataCommand) -> CliResult<()> {
    let mut s = Session::start(&a.common)?;
    let ds = s.load(&a.input)?;
    let pipeline = s.pipeline(&a.pipeline)?;
    let fitted = fit_pipeline(&ds, &pipeline, s.seed)?;
    let report = TrainReport {
        config: &pipeline,
        seed: s.seed,
        dataset: DatasetSummary::of(&ds),
        train_preprocess: &fitted.train_preprocess,
        feature_names: &fitted.bundle.preprocess.feature_names,
        feature_scores: &fitted.feature_scores,
        prefilter_mask: fitted.prefilter_mask.as_ref(),
        selected_mask: &fitted.selected_mask,
        selected_features: fitted.selected_features(),
        fitness_history: &fitted.fitness_history,
        hyperparameters: &fitted.hyperparameters,
        tuning_trace: &fitted.tuning_trace,
        model_fingerprint: fitted.bundle.fingerprint()?,
    };
    s.out.write_json("train_report.json", &report)?;
    s.out.write_json("timings.json", &fitted.timings)?;
    s.out.write_json("model.json", &fitted.bundle)?;
    s.finish("train")
}

#[derive(Serialize)]
struct EvaluationOutput {
    voting: flowguard::models::Voting,
    model_fingerprint: String,
    metrics: metrics::MetricsReport,
}

pub fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let mut s = Session::start(&a.common)?;
    let ds = s.load(&a.input)?;
    s.inputs.push(hash_input(&a.model)?);
    let bundle: ModelBundle = ModelBundle::load(&a.model)?;
    let voting = a.voting.map_or(bundle.ensemble.hyperparameters.voting, Into::into);
    let (pred, truth) = bundle.predict(&ds, voting)?;
    let out = EvaluationOutput {
        voting,
        model_fingerprint: bundle.fingerprint()?,
        metrics: metrics::evaluate(&pred, &truth)?,
    };
    s.out.write_json("metrics.json", &out)?;
    let rows = truth.iter().zip(&pred).map(|(t, p)| [t.to_string(), p.to_string()]);
    s.out.write("predictions.csv", &csv_bytes(&["truth", "predicted"], rows)?)?;
    s.finish("evaluate")
}

pub fn run(a: DataCommand) -> CliResult<()> {
    let mut s = Session::start(&a.common)?;
    let ds = s.load(&a.input)?;
    let pipeline = s.pipeline(&a.pipeline)?;
    let trained = run_pipeline_trained(&ds, &pipeline, s.seed)?;
    let m = trained.report.primary_metrics();
    info!(
        "accuracy {:.4}, detection rate {:.4}, {} of {} features",
        m.accuracy.unwrap_or(f64::NAN),
        m.detection_rate.unwrap_or(f64::NAN),
        trained.report.selected_mask.count(),
        trained.report.selected_mask.len()
    );
    s.out.write_json("run_report.json", &without_timings(&trained.report)?)?;
    s.out.write_json("timings.json", &trained.report.timings)?;
    s.out.write_json("metrics.json", &metrics_by_mode(&trained.report.metrics))?;
    s.out.write_json("model.json", &trained.bundle)?;
    s.finish("run")
}

pub fn sweep(a: RepeatArgs) -> CliResult<()> {
    let mut s = Session::start(&a.data.common)?;
    let ds = s.load(&a.data.input)?;
    let mut exp = s.file.experiment(s.seed)?;
    if let Some(r) = a.repeats {
        exp.seeds = seed_series(s.seed, r)?;
    }
    // The grid owns the attack ratio; --eta narrows it to one value.
    if let Some(eta) = a.data.pipeline.eta {
        exp.eta_values = vec![eta];
    }
    let flags = PipelineFlags {
        eta: None,
        ..a.data.pipeline.clone()
    };
    exp.pipeline = s.pipeline(&flags)?;
    let result = sweep_detection_rate(&ds, &exp)?;
    for c in result.cells.iter().filter(|c| c.error.is_some()) {
        log::warn!("cell eta={} r={} seed={} failed", c.eta, c.at_risk_fraction, c.seed);
    }
    let mut table = Vec::new();
    result.write_csv(&mut table)?;
    s.out.write("sweep.csv", &table)?;
    s.out.write_json("sweep.json", &result)?;
    s.finish("sweep")
}

pub fn compare_voting(a: RepeatArgs) -> CliResult<()> {
    let mut s = Session::start(&a.data.common)?;
    let ds = s.load(&a.data.input)?;
    let pipeline = s.pipeline(&a.data.pipeline)?;
    let seeds = seed_series(s.seed, a.repeats.unwrap_or(s.file.compare_voting.repeats))?;
    let runs = seeds
        .iter()
        .map(|&seed| compare_voting_runs(&ds, &pipeline, seed))
        .collect::<flowguard::Result<Vec<_>>>()?;
    let mut table = Vec::new();
    write_voting_table(&runs, &mut table)?;
    s.out.write("voting.csv", &table)?;
    s.out.write_json("voting.json", &runs)?;
    s.finish("compare-voting")
}

pub fn cv(a: CvArgs) -> CliResult<()> {
    let mut s = Session::start(&a.data.common)?;
    let ds = s.load(&a.data.input)?;
    let pipeline = s.pipeline(&a.data.pipeline)?;
    let k = a.folds.unwrap_or(s.file.folds);
    let summary = cross_validate(&ds, k, &pipeline, s.seed)?;
    let mut table = Vec::new();
    summary.write_table(&mut table)?;
    s.out.write("cv.csv", &table)?;
    s.out.write_json("cv.json", &summary)?;
    s.finish("cv")
}
