//! Command-line surface: `canmt <command> [flags]`.
//!
//! Every command writes a JSON [`RunManifest`] next to its outputs. Failures
//! print a single `error: <kind>: <message>` line and exit with status 1;
//! usage errors print the usage text and exit with status 2.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::TaskKind;
use crate::error::Result;
use crate::training::Objective;

pub use manifest::{manifest_path_for, ManifestBuilder, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "canmt", version, about = "Competency-aware NMT: train, translate, self-estimate and evaluate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic reversible task: train/test corpora, vocabularies, task sidecar.
    GenData(GenDataArgs),
    /// Train a model and write checkpoints plus a loss curve.
    Train(TrainArgs),
    /// Average checkpoints elementwise into one.
    AvgCheckpoints(AvgArgs),
    /// Beam-search translate sources and attach the self-estimated quality.
    Translate(TranslateArgs),
    /// Score an arbitrary hypothesis file with one method.
    Score(ScoreArgs),
    /// Build a degraded hypothesis set with exact edit-distance oracle labels.
    Degrade(DegradeArgs),
    /// Score a degraded set with several methods and report correlations and bins.
    Evaluate(EvaluateArgs),
    /// Z-normalize and sum two score files.
    Combine(CombineArgs),
    /// Resample a degraded set biased toward one quality level.
    SampleBiased(SampleArgs),
}

/// Quality scoring methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Self-estimated quality Q.
    #[value(name = "canmt-q")]
    CanmtQ,
    /// Length-normalized translation probability.
    Tp,
    /// TP averaged over Monte Carlo dropout passes.
    Dtp,
    /// Sentence BLEU of the round-trip translation against the source.
    Rtt,
    /// Sentence BLEU of the hypothesis against the reference.
    Sentbleu,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::CanmtQ => "canmt-q",
            Method::Tp => "tp",
            Method::Dtp => "dtp",
            Method::Rtt => "rtt",
            Method::Sentbleu => "sentbleu",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory written by `gen-data` (vocabularies, corpora).
    #[arg(long, default_value = "data")]
    pub data: PathBuf,
    /// Use the target side as source (backward direction).
    #[arg(long)]
    pub reverse: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BeamArgs {
    #[arg(long, default_value_t = 4)]
    pub beam: usize,
    #[arg(long, default_value_t = 0.6)]
    pub length_penalty: f64,
    /// Longest decoder sequence including BOS/EOS; defaults to the model's max_len.
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DtpArgs {
    #[arg(long, default_value_t = 30)]
    pub dtp_k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dtp_rate: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value = "cipher-reverse")]
    pub task: TaskKind,
    /// Training pairs.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// Held-out pairs from the same task.
    #[arg(long, default_value_t = 500)]
    pub test_n: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub content_tokens: usize,
    #[arg(long, default_value_t = 5)]
    pub min_len: usize,
    #[arg(long, default_value_t = 15)]
    pub max_len: usize,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Training corpus; defaults to `<data>/train.tsv`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Flat key=value file with model and training settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// `joint` or `translation-only`.
    #[arg(long)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub warmup_steps: Option<u64>,
    #[arg(long)]
    pub lr_factor: Option<f64>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    #[arg(long)]
    pub keep_last: Option<usize>,
    #[arg(long)]
    pub label_smoothing: Option<f64>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    /// Any other setting as key=value (repeatable); overrides the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct AvgArgs {
    #[arg(required = true)]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TranslateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// One source per line, or a corpus file whose source side is used (the
    /// target side with `--reverse`). Defaults to `<data>/test.tsv`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "translations.tsv")]
    pub out: PathBuf,
    #[command(flatten)]
    pub beam: BeamArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// TSV of `id, source, hypothesis[, ...]`.
    #[arg(long)]
    pub hyps: PathBuf,
    #[arg(long, value_enum, default_value = "canmt-q")]
    pub method: Method,
    /// Backward model, required for `rtt`.
    #[arg(long)]
    pub backward_ckpt: Option<PathBuf>,
    #[command(flatten)]
    pub dtp: DtpArgs,
    #[command(flatten)]
    pub beam: BeamArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "scores.tsv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DegradeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Reference pairs; defaults to `<data>/test.tsv`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Edit counts cycled over items.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8")]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    #[arg(long, default_value = "degraded.tsv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Degraded set written by `degrade`.
    #[arg(long = "set", default_value = "degraded.tsv")]
    pub set: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "canmt-q,tp")]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub backward_ckpt: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub bins: usize,
    /// Draws per quality-drift level (0 disables drift rows).
    #[arg(long, default_value_t = 10_000)]
    pub drift_draws: usize,
    #[command(flatten)]
    pub dtp: DtpArgs,
    #[command(flatten)]
    pub beam: BeamArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "report.json")]
    pub out_json: PathBuf,
    #[arg(long, default_value = "report.csv")]
    pub out_csv: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CombineArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value = "combined.tsv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long = "set", default_value = "degraded.tsv")]
    pub set: PathBuf,
    /// Quality level to favour, 1 (worst quarter) to 4 (best).
    #[arg(long)]
    pub target: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "biased.tsv")]
    pub out: PathBuf,
}

/// Runs a parsed command.
pub fn run(cli: Cli) -> Result<RunManifest> {
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::AvgCheckpoints(a) => commands::avg_checkpoints(&a),
        Command::Translate(a) => commands::translate(&a),
        Command::Score(a) => commands::score(&a),
        Command::Degrade(a) => commands::degrade(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Combine(a) => commands::combine(&a),
        Command::SampleBiased(a) => commands::sample_biased(&a),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(_) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            1
        }
    }
}
