//! Argument parsing and dispatch. Flags override values from `--config`
//! files, and `--seed` overrides every seed of the run.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use humor_core::corpus::{CorpusConfig, Ratio, Variant};
use humor_core::models::{CnnHighwayConfig, ModelConfig, TransformerConfig};

use crate::error::Result;
use crate::files::{self, RunManifest};
use crate::ingest::{self, Api, IngestConfig, SystemClock, UreqClient};
use crate::workflow::{self, MatchConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "humor",
    version,
    about = "Humor classification: ingest jokes, build datasets, train and evaluate classifiers"
)]
pub struct Cli {
    /// Seed for every random choice of the run (splits, sampling, init, shuffling, dropout).
    #[arg(long, global = true, env = "HUMOR_SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poll the listing API, append new jokes to the store and refresh scores.
    Ingest(IngestArgs),
    /// Label jokes at a score threshold and write balanced train/validation/test files.
    BuildDataset(BuildArgs),
    /// Pick non-joke sentences whose length histogram matches the jokes.
    MatchNegatives(MatchArgs),
    /// Train a classifier, writing one checkpoint per epoch.
    Train(TrainArgs),
    /// Score a dataset with the selected and the final checkpoint of a run.
    Evaluate(EvaluateArgs),
    /// Zero-shot evaluation of a checkpoint on an external dataset.
    Transfer(TransferArgs),
    /// Majority-vote labels and the funny fraction from annotator tags.
    HumanBaseline(HumanArgs),
    /// Label a dataset CSV or a plain text file, one sentence per line.
    Predict(PredictArgs),
    /// Build accuracy-by-variant and metrics tables from a report spec.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// JSON file with IngestConfig fields.
    #[arg(long, env = "HUMOR_INGEST_CONFIG")]
    pub config: PathBuf,
    /// JSONL joke store.
    #[arg(long, env = "HUMOR_STORE", default_value = "jokes.jsonl")]
    pub store: PathBuf,
    /// Run one poll and exit.
    #[arg(long)]
    pub once: bool,
    /// Directory for the run manifest (default: the store's directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Body,
    Punchline,
    Full,
    All,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// JSONL joke store.
    #[arg(long, env = "HUMOR_STORE")]
    pub store: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with CorpusConfig fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Minimum score labeled funny.
    #[arg(long)]
    pub threshold: Option<u64>,
    /// Train share per class, as a decimal or a fraction like 3/4.
    #[arg(long)]
    pub split: Option<Ratio>,
    /// Validation share of the balanced holdout; the rest is test.
    #[arg(long)]
    pub validation_fraction: Option<Ratio>,
    #[arg(long, value_enum, default_value = "all")]
    pub variant: Vec<VariantArg>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Jokes: a dataset CSV or one joke per line.
    #[arg(long)]
    pub jokes: PathBuf,
    /// Candidate sentences, one per line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with count, seed, word_bin_width, char_bin_width.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of sentences to select.
    #[arg(long)]
    pub count: Option<u64>,
    #[arg(long)]
    pub word_bin_width: Option<usize>,
    #[arg(long)]
    pub char_bin_width: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Transformer,
    CnnHighway,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV (usually the upsampled split).
    #[arg(long)]
    pub train: PathBuf,
    /// Validation CSV used for checkpoint selection.
    #[arg(long)]
    pub validation: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON run config with `model`, `train` and `vocab` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model architecture; replaces the config's model section with defaults.
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Output directory of a `train` run.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Vocabulary file (default: vocab.txt beside the checkpoint or one level up).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HumanArgs {
    /// CSV with header item_id,annotator_id,label.
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// A dataset CSV or a text file with one sentence per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON report spec listing tables, checkpoints and datasets.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn config_or_default<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), files::read_json)
}

fn print_json<T: serde::Serialize>(value: &T) {
    let mut out = std::io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, value);
    let _ = writeln!(out);
}

pub fn corpus_config(args: &BuildArgs, seed: Option<u64>) -> Result<CorpusConfig> {
    let mut c: CorpusConfig = config_or_default(args.config.as_deref())?;
    if let Some(t) = args.threshold {
        c.score_threshold = t;
    }
    if let Some(s) = args.split {
        c.train_fraction = s;
    }
    if let Some(v) = args.validation_fraction {
        c.holdout_validation_fraction = v;
    }
    if let Some(s) = seed {
        c.seed = s;
    }
    c.validate()?;
    Ok(c)
}

fn variants(args: &[VariantArg]) -> Vec<Variant> {
    let mut out = Vec::new();
    for a in args {
        let add: &[Variant] = match a {
            VariantArg::Body => &[Variant::Body],
            VariantArg::Punchline => &[Variant::Punchline],
            VariantArg::Full => &[Variant::Full],
            VariantArg::All => &Variant::ALL,
        };
        for v in add {
            if !out.contains(v) {
                out.push(*v);
            }
        }
    }
    out
}

pub fn run_config(args: &TrainArgs, seed: Option<u64>) -> Result<RunConfig> {
    let value = match &args.config {
        Some(p) => files::read_json(p)?,
        None => serde_json::json!({}),
    };
    let mut c = RunConfig::from_json(value)?;
    if let Some(kind) = args.model {
        let same = matches!(
            (kind, &c.model),
            (ModelKind::Transformer, ModelConfig::Transformer(_))
                | (ModelKind::CnnHighway, ModelConfig::CnnHighway(_))
        );
        if !same {
            let lr_default = args.config.is_none();
            c.model = match kind {
                ModelKind::Transformer => ModelConfig::Transformer(TransformerConfig::default()),
                ModelKind::CnnHighway => ModelConfig::CnnHighway(CnnHighwayConfig::default()),
            };
            if lr_default && kind == ModelKind::CnnHighway {
                c.train.learning_rate = workflow::CNN_DEFAULT_LEARNING_RATE;
            }
        }
    }
    if let Some(e) = args.epochs {
        c.train.max_epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        c.train.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        c.train.batch_size = b;
    }
    if let Some(s) = seed {
        c.train.seed = s;
    }
    c.train.validate()?;
    Ok(c)
}

fn run_ingest(args: &IngestArgs) -> Result<()> {
    let config: IngestConfig = files::read_json(&args.config)?;
    config.validate()?;
    let out = args.out.clone().unwrap_or_else(|| {
        args.store
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    let mut manifest = RunManifest::new("ingest", &config, Vec::new());
    manifest.input(&args.config)?;
    let client = UreqClient::default();
    let clock = SystemClock;
    let mut api = Api::new(config, &client, &clock)?;
    ingest::run(&args.store, &mut api, args.once, |report| {
        print_json(report);
        Ok(())
    })?;
    manifest.output(&args.store);
    let path = out.join(workflow::MANIFEST);
    manifest.output(&path);
    manifest.write(&path)
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => run_ingest(&a),
        Command::BuildDataset(a) => {
            let config = corpus_config(&a, seed)?;
            print_json(&workflow::build_dataset(
                &a.store,
                &a.out,
                &config,
                &variants(&a.variant),
            )?);
            Ok(())
        }
        Command::MatchNegatives(a) => {
            let mut c: MatchConfig = config_or_default(a.config.as_deref())?;
            if let Some(n) = a.count {
                c.count = n;
            }
            if let Some(w) = a.word_bin_width {
                c.word_bin_width = w;
            }
            if let Some(w) = a.char_bin_width {
                c.char_bin_width = w;
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            let report = workflow::match_negatives_cmd(&a.jokes, &a.corpus, &a.out, &c)?;
            println!(
                "selected {} sentences from {}",
                report.requested, report.corpus_sentences
            );
            Ok(())
        }
        Command::Train(a) => {
            let config = run_config(&a, seed)?;
            print_json(&workflow::train(&a.train, &a.validation, &a.out, &config)?);
            Ok(())
        }
        Command::Evaluate(a) => {
            print_json(&workflow::evaluate_run(&a.run, &a.data, &a.out)?);
            Ok(())
        }
        Command::Transfer(a) => {
            print_json(
                &workflow::transfer(&a.checkpoint, a.vocab.as_deref(), &a.data, &a.out)?.metrics,
            );
            Ok(())
        }
        Command::HumanBaseline(a) => {
            let vote = workflow::human_baseline(&a.annotations, &a.out)?;
            println!(
                "{} items, fraction funny {:.3}, {} ties",
                vote.items.len(),
                vote.fraction_funny,
                vote.ties
            );
            Ok(())
        }
        Command::Predict(a) => {
            let n = workflow::predict(&a.checkpoint, a.vocab.as_deref(), &a.input, &a.out)?;
            println!(
                "wrote {n} predictions to {}",
                a.out.join("predictions.csv").display()
            );
            Ok(())
        }
        Command::Report(a) => {
            print!("{}", workflow::report(&a.spec, &a.out)?.to_markdown());
            Ok(())
        }
    }
}

/// Runs the CLI and maps errors to `error[<category>]: ...` plus an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
