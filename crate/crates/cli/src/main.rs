//! `flowguard`: botnet flow detection from the command line.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowguard::models::Voting;

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "flowguard", version, about = "Botnet flow detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic flow dataset
    Synth(SynthArgs),
    /// Clean, encode and balance a dataset
    Preprocess(DataCommand),
    /// Rank features by robust two-sample distance
    Score(DataCommand),
    /// Search for a compact feature subset
    Select(DataCommand),
    /// Tune ensemble hyperparameters
    Tune(TuneArgs),
    /// Fit the full pipeline on a dataset and save the model
    Train(DataCommand),
    /// Score a labeled dataset with a saved model
    Evaluate(EvaluateArgs),
    /// Split, train and evaluate in one go
    Run(DataCommand),
    /// Detection rate over attack ratios and at-risk fractions
    Sweep(RepeatArgs),
    /// Hard vs soft voting on the same trained models
    CompareVoting(RepeatArgs),
    /// Stratified k-fold cross-validation
    Cv(CvArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Master seed; a random one is drawn and recorded when omitted
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory; nothing is written elsewhere
    #[arg(long)]
    pub out: PathBuf,

    /// Worker threads (results do not depend on this)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct Input {
    /// Flow CSV file
    #[arg(long)]
    pub input: PathBuf,

    /// JSON schema mapping (label column, attack labels, column kinds)
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PipelineFlags {
    /// Target attack fraction of the training set
    #[arg(long)]
    pub eta: Option<f64>,

    /// Training share of the stratified split
    #[arg(long)]
    pub train_fraction: Option<f64>,

    /// Keep only the best-scoring columns before selection
    #[arg(long)]
    pub keep_top: Option<usize>,

    #[arg(long, value_enum)]
    pub voting: Option<VotingArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum VotingArg {
    Hard,
    Soft,
}

impl From<VotingArg> for Voting {
    fn from(v: VotingArg) -> Self {
        match v {
            VotingArg::Hard => Voting::Hard,
            VotingArg::Soft => Voting::Soft,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub normal: Option<usize>,
    #[arg(long)]
    pub attack: Option<usize>,
    /// Columns whose distribution depends on the class
    #[arg(long)]
    pub informative: Option<usize>,
    /// Columns with one distribution for both classes
    #[arg(long)]
    pub noise: Option<usize>,
    #[arg(long)]
    pub missing_rate: Option<f64>,
}

#[derive(Args, Debug)]
pub struct DataCommand {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataCommand,
    /// Feature mask from `select` (selection.json) or a JSON array of booleans
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: Input,
    /// Model file written by `train` or `run`
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub voting: Option<VotingArg>,
}

#[derive(Args, Debug)]
pub struct RepeatArgs {
    #[command(flatten)]
    pub data: DataCommand,
    /// Number of seeds, counting up from --seed
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataCommand,
    #[arg(long)]
    pub folds: Option<usize>,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Synth(a) => &a.common,
            Command::Preprocess(a) | Command::Score(a) | Command::Select(a) | Command::Train(a) | Command::Run(a) => {
                &a.common
            }
            Command::Tune(a) => &a.data.common,
            Command::Evaluate(a) => &a.common,
            Command::Sweep(a) | Command::CompareVoting(a) => &a.data.common,
            Command::Cv(a) => &a.data.common,
        }
    }
}

fn init_threads(threads: Option<usize>) -> CliResult<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::internal("thread pool", e))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.command.common().threads)?;
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Score(a) => commands::score(a),
        Command::Select(a) => commands::select(a),
        Command::Tune(a) => commands::tune(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Run(a) => commands::run(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::CompareVoting(a) => commands::compare_voting(a),
        Command::Cv(a) => commands::cv(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
