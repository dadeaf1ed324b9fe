//! The command workflows. Each function reads its inputs, writes its
//! outputs under `out`, and finishes with `out/manifest.json`.

use std::path::{Path, PathBuf};

use humor_core::corpus::{
    make_variants, BundleSummary, CorpusConfig, DatasetBundle, DropCounts, Label, LabeledExample,
    Variant,
};
use humor_core::metrics::{majority_vote, ConfusionMatrix, MajorityVote, Metrics};
use humor_core::models::{Model, ModelConfig};
use humor_core::negmatch::{
    build_target_histogram, match_negatives, MatchReport, DEFAULT_CHAR_BIN_WIDTH,
    DEFAULT_WORD_BIN_WIDTH,
};
use humor_core::report::{MetricsRow, MetricsTable, VariantRow, VariantTable};
use humor_core::tokenizer::Vocabulary;
use humor_core::train::{
    encode_examples, evaluate, predict as predict_examples, train as train_model, transfer_eval,
    EncodedExample, TrainConfig, TransferReport,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::files::{self, CheckpointMeta, RunLogEntry, RunManifest};
use crate::store;

pub const MANIFEST: &str = "manifest.json";
/// Used for CNN runs whose config leaves `learning_rate` unset.
pub const CNN_DEFAULT_LEARNING_RATE: f64 = 1e-3;

fn finish(mut manifest: RunManifest, out: &Path) -> Result<RunManifest> {
    let path = out.join(MANIFEST);
    manifest.output(&path);
    manifest.write(&path)?;
    Ok(manifest)
}

fn dataset_file(split: &str) -> String {
    format!("{split}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub counts: BundleSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub records: usize,
    pub dropped: DropCounts,
    pub variants: Vec<VariantSummary>,
}

/// Labels the store at the threshold and writes, per variant, the
/// `labeled`, `train`, `train_upsampled`, `holdout`, `holdout_balanced`,
/// `validation` and `test` splits to `out/<variant>/`.
pub fn build_dataset(
    store_path: &Path,
    out: &Path,
    config: &CorpusConfig,
    variants: &[Variant],
) -> Result<DatasetSummary> {
    config.validate()?;
    let mut manifest = RunManifest::new("build-dataset", config, vec![config.seed]);
    manifest.input(store_path)?;
    let records = store::load(store_path)?;
    let all = make_variants(records.records(), config);
    let mut summary = DatasetSummary {
        records: records.len(),
        dropped: all.dropped,
        variants: Vec::new(),
    };
    for &variant in variants {
        let bundle = DatasetBundle::build(variant, all.get(variant).to_vec(), config)?;
        let dir = out.join(variant.as_str());
        let splits: [(&str, &[LabeledExample]); 7] = [
            ("labeled", &bundle.labeled),
            ("train", &bundle.train),
            ("train_upsampled", &bundle.train_balanced),
            ("holdout", &bundle.holdout),
            ("holdout_balanced", &bundle.holdout_balanced),
            ("validation", &bundle.validation),
            ("test", &bundle.test),
        ];
        for (name, examples) in splits {
            let path = dir.join(dataset_file(name));
            files::write_dataset(&path, examples)?;
            manifest.output(&path);
        }
        summary.variants.push(VariantSummary {
            variant,
            counts: bundle.summary(),
        });
    }
    let path = out.join("summary.json");
    files::write_json(&path, &summary)?;
    manifest.output(&path);
    finish(manifest, out)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub count: u64,
    pub seed: u64,
    pub word_bin_width: usize,
    pub char_bin_width: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 0,
            word_bin_width: DEFAULT_WORD_BIN_WIDTH,
            char_bin_width: DEFAULT_CHAR_BIN_WIDTH,
        }
    }
}

/// Joke texts from a dataset CSV (`text` column) or a one-per-line file.
fn read_texts(path: &Path) -> Result<Vec<String>> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        Ok(files::read_dataset(path, Variant::Full)?
            .into_iter()
            .map(|e| e.text)
            .collect())
    } else {
        files::read_lines(path)
    }
}

/// Writes `out/negatives.txt` and its bin report `out/negatives.report.json`.
pub fn match_negatives_cmd(
    jokes: &Path,
    corpus: &Path,
    out: &Path,
    config: &MatchConfig,
) -> Result<MatchReport> {
    let mut manifest = RunManifest::new("match-negatives", config, vec![config.seed]);
    manifest.input(jokes)?;
    manifest.input(corpus)?;
    let jokes = read_texts(jokes)?;
    let target = build_target_histogram(&jokes, config.word_bin_width, config.char_bin_width)?;
    let sentences = files::read_lines(corpus)?;
    let matched = match_negatives(&sentences, &target, config.count, config.seed)?;
    let txt = out.join("negatives.txt");
    let report = out.join("negatives.report.json");
    files::write_lines(&txt, &matched.sentences)?;
    files::write_json(&report, &matched.report)?;
    manifest.output(&txt);
    manifest.output(&report);
    finish(manifest, out)?;
    Ok(matched.report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub max_size: usize,
    pub min_freq: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            max_size: 30_000,
            min_freq: 1,
        }
    }
}

/// Everything `train` needs besides the data. `model.vocab_size` is filled
/// in from the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub vocab: VocabConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::Transformer(Default::default()),
            train: TrainConfig::default(),
            vocab: VocabConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a run config. Missing sections take their defaults, and a CNN
    /// without an explicit learning rate uses [`CNN_DEFAULT_LEARNING_RATE`].
    pub fn from_json(value: Value) -> Result<Self> {
        let Value::Object(mut map) = value else {
            return Err(Error::Config("run config must be a JSON object".into()));
        };
        for key in map.keys() {
            if !["model", "train", "vocab"].contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown run config section `{key}`")));
            }
        }
        let section = |map: &mut serde_json::Map<String, Value>, key: &str| {
            map.remove(key).unwrap_or(Value::Object(Default::default()))
        };
        let mut model_v = map
            .remove("model")
            .unwrap_or_else(|| serde_json::json!({"kind": "transformer"}));
        if let Value::Object(m) = &mut model_v {
            m.entry("kind").or_insert_with(|| "transformer".into());
        }
        let train_v = section(&mut map, "train");
        let lr_given = train_v.get("learning_rate").is_some();
        let model: ModelConfig =
            serde_json::from_value(model_v).map_err(|e| Error::Config(format!("model: {e}")))?;
        let mut train: TrainConfig =
            serde_json::from_value(train_v).map_err(|e| Error::Config(format!("train: {e}")))?;
        let vocab: VocabConfig = serde_json::from_value(section(&mut map, "vocab"))
            .map_err(|e| Error::Config(format!("vocab: {e}")))?;
        if matches!(model, ModelConfig::CnnHighway(_)) && !lr_given {
            train.learning_rate = CNN_DEFAULT_LEARNING_RATE;
        }
        Ok(Self {
            model,
            train,
            vocab,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(files::read_json(path)?)
    }
}

pub fn with_vocab_size(model: &ModelConfig, vocab_size: usize) -> ModelConfig {
    let mut m = model.clone();
    match &mut m {
        ModelConfig::Transformer(c) => c.vocab_size = vocab_size,
        ModelConfig::CnnHighway(c) => c.vocab_size = vocab_size,
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub model: String,
    pub epochs: Vec<RunLogEntry>,
    pub selected_epoch: usize,
    pub selected_checkpoint: PathBuf,
    pub final_checkpoint: PathBuf,
}

pub const VOCAB_FILE: &str = "vocab.txt";
pub const TRAIN_SUMMARY: &str = "train_summary.json";

fn checkpoint_rel(epoch: usize) -> PathBuf {
    PathBuf::from("checkpoints").join(format!("epoch-{epoch}.ckpt"))
}

/// Builds the vocabulary from the training texts, trains, and writes one
/// checkpoint per epoch plus `run_log.jsonl` and `train_summary.json`.
/// Paths inside the outputs are relative to `out`.
pub fn train(
    train_csv: &Path,
    validation_csv: &Path,
    out: &Path,
    config: &RunConfig,
) -> Result<TrainSummary> {
    config.train.validate()?;
    let mut manifest = RunManifest::new("train", config, vec![config.train.seed]);
    manifest.input(train_csv)?;
    manifest.input(validation_csv)?;
    let train_set = files::read_dataset(train_csv, Variant::Full)?;
    let val_set = files::read_dataset(validation_csv, Variant::Full)?;
    if train_set.is_empty() {
        return Err(Error::Core(humor_core::CoreError::EmptyInput(
            "training set",
        )));
    }
    let texts: Vec<&str> = train_set.iter().map(|e| e.text.as_str()).collect();
    let vocab = Vocabulary::build(&texts, config.vocab.max_size, config.vocab.min_freq)?;
    let vocab_path = out.join(VOCAB_FILE);
    files::write_vocab(&vocab_path, &vocab)?;
    manifest.output(&vocab_path);

    let model_cfg = with_vocab_size(&config.model, vocab.len());
    let max_len = model_cfg.max_seq_len();
    let train_enc = encode_examples(&vocab, &train_set, max_len);
    let val_enc = encode_examples(&vocab, &val_set, max_len);
    let mut model = Model::init(model_cfg.clone(), config.train.seed)?;
    let vocab_digest = files::vocab_digest(&vocab);
    let log_path = out.join("run_log.jsonl");
    let mut log = files::JsonlWriter::create(&log_path)?;
    let mut entries = Vec::new();
    let mut io_error = None;
    let result = train_model(&mut model, &train_enc, &val_enc, &config.train, |rec, m| {
        let rel = checkpoint_rel(rec.epoch);
        let meta = CheckpointMeta {
            model: model_cfg.clone(),
            train: config.train.clone(),
            seed: config.train.seed,
            epoch: rec.epoch,
            vocab_digest: vocab_digest.clone(),
            params_digest: m.params.digest(),
        };
        let entry = RunLogEntry {
            epoch: rec.epoch,
            train_loss: rec.train_loss,
            val_accuracy: rec.val_accuracy,
            checkpoint_path: rel.clone(),
        };
        let written =
            files::save_checkpoint(&out.join(&rel), m, &meta).and_then(|()| log.write(&entry));
        match written {
            Ok(()) => {
                entries.push(entry);
                Ok(())
            }
            Err(e) => {
                let msg = e.to_string();
                io_error = Some(e);
                Err(humor_core::CoreError::Checkpoint(msg))
            }
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let log_result = result?;
    manifest.output(&log_path);
    for e in &entries {
        manifest.output(&out.join(&e.checkpoint_path));
        manifest.output(&files::sidecar_path(&out.join(&e.checkpoint_path)));
    }
    let summary = TrainSummary {
        model: model_cfg.kind_name().into(),
        selected_epoch: log_result.selected_epoch,
        selected_checkpoint: checkpoint_rel(log_result.selected_epoch),
        final_checkpoint: checkpoint_rel(entries.len()),
        epochs: entries,
    };
    let path = out.join(TRAIN_SUMMARY);
    files::write_json(&path, &summary)?;
    manifest.output(&path);
    finish(manifest, out)?;
    Ok(summary)
}

/// `vocab.txt` next to the checkpoint or one directory up.
pub fn find_vocab(checkpoint: &Path) -> Result<PathBuf> {
    let dir = checkpoint.parent().unwrap_or(Path::new("."));
    let candidates = [dir.join(VOCAB_FILE), dir.join("..").join(VOCAB_FILE)];
    candidates
        .iter()
        .find(|p| p.is_file())
        .cloned()
        .ok_or_else(|| {
            Error::Config(format!(
                "no {VOCAB_FILE} found next to {}; pass --vocab",
                checkpoint.display()
            ))
        })
}

fn open_model(
    checkpoint: &Path,
    vocab: Option<&Path>,
    manifest: &mut RunManifest,
) -> Result<(Model, Vocabulary)> {
    let vocab_path = match vocab {
        Some(p) => p.to_path_buf(),
        None => find_vocab(checkpoint)?,
    };
    manifest.input(checkpoint)?;
    manifest.input(&vocab_path)?;
    let vocab = files::read_vocab(&vocab_path)?;
    let (model, _) = files::load_checkpoint(checkpoint, Some(&vocab))?;
    Ok((model, vocab))
}

fn encode_for(
    model: &Model,
    vocab: &Vocabulary,
    examples: &[LabeledExample],
) -> Vec<EncodedExample> {
    encode_examples(vocab, examples, model.config.max_seq_len())
}

fn gold_of(examples: &[LabeledExample]) -> Vec<(String, Label)> {
    examples.iter().map(|e| (e.id.clone(), e.label)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEvaluation {
    pub epoch: usize,
    pub checkpoint: PathBuf,
    pub examples: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub selected: CheckpointEvaluation,
    #[serde(rename = "final")]
    pub final_: CheckpointEvaluation,
}

/// Scores a dataset with both the selected and the final checkpoint of a
/// training run. Writes `metrics.json` and one predictions file per
/// checkpoint.
pub fn evaluate_run(run_dir: &Path, data: &Path, out: &Path) -> Result<EvaluationReport> {
    let summary_path = run_dir.join(TRAIN_SUMMARY);
    let summary: TrainSummary = files::read_json(&summary_path)?;
    let mut manifest = RunManifest::new("evaluate", &summary, Vec::new());
    manifest.input(data)?;
    let examples = files::read_dataset(data, Variant::Full)?;
    let gold = gold_of(&examples);
    let final_epoch = summary
        .epochs
        .last()
        .map_or(summary.selected_epoch, |e| e.epoch);
    let mut results = Vec::new();
    for (tag, epoch, rel) in [
        (
            "selected",
            summary.selected_epoch,
            &summary.selected_checkpoint,
        ),
        ("final", final_epoch, &summary.final_checkpoint),
    ] {
        let ckpt = run_dir.join(rel);
        let (model, vocab) = open_model(&ckpt, Some(&run_dir.join(VOCAB_FILE)), &mut manifest)?;
        let eval = evaluate(&model, &encode_for(&model, &vocab, &examples))?;
        let pred_path = out.join(format!("predictions-{tag}.csv"));
        files::write_predictions(&pred_path, &eval.predictions, Some(&gold))?;
        manifest.output(&pred_path);
        results.push(CheckpointEvaluation {
            epoch,
            checkpoint: rel.clone(),
            examples: examples.len(),
            confusion: eval.confusion,
            metrics: eval.metrics,
        });
    }
    let final_ = results.pop().expect("two evaluations");
    let selected = results.pop().expect("two evaluations");
    let report = EvaluationReport { selected, final_ };
    let path = out.join("metrics.json");
    files::write_json(&path, &report)?;
    manifest.output(&path);
    finish(manifest, out)?;
    Ok(report)
}

/// Zero-shot scoring of an external dataset exactly as given. Writes
/// `metrics.json` (accuracy, precision, recall, f1), `transfer.json` and
/// `predictions.csv`.
pub fn transfer(
    checkpoint: &Path,
    vocab: Option<&Path>,
    data: &Path,
    out: &Path,
) -> Result<TransferReport> {
    let mut manifest = RunManifest::new("transfer", &Value::Null, Vec::new());
    manifest.input(data)?;
    let (model, vocab) = open_model(checkpoint, vocab, &mut manifest)?;
    let examples = files::read_dataset(data, Variant::Full)?;
    let (report, predictions) = transfer_eval(&model, &encode_for(&model, &vocab, &examples))?;
    let outputs = [
        (
            out.join("metrics.json"),
            serde_json::to_value(report.metrics).expect("metrics"),
        ),
        (
            out.join("transfer.json"),
            serde_json::to_value(&report).expect("report"),
        ),
    ];
    for (path, value) in &outputs {
        files::write_json(path, value)?;
        manifest.output(path);
    }
    let pred_path = out.join("predictions.csv");
    files::write_predictions(&pred_path, &predictions, Some(&gold_of(&examples)))?;
    manifest.output(&pred_path);
    finish(manifest, out)?;
    Ok(report)
}

/// Labels a dataset CSV (gold column kept) or a one-per-line text file.
pub fn predict(checkpoint: &Path, vocab: Option<&Path>, input: &Path, out: &Path) -> Result<usize> {
    let mut manifest = RunManifest::new("predict", &Value::Null, Vec::new());
    manifest.input(input)?;
    let (model, vocab) = open_model(checkpoint, vocab, &mut manifest)?;
    let is_csv = input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (examples, gold) = if is_csv {
        let ex = files::read_dataset(input, Variant::Full)?;
        let gold = gold_of(&ex);
        (ex, Some(gold))
    } else {
        let ex = files::read_lines(input)?
            .into_iter()
            .enumerate()
            .map(|(i, text)| LabeledExample {
                id: format!("line-{}", i + 1),
                text,
                label: Label::NotFunny,
                variant: Variant::Full,
            })
            .collect::<Vec<_>>();
        (ex, None)
    };
    let predictions = predict_examples(&model, &encode_for(&model, &vocab, &examples))?;
    let path = out.join("predictions.csv");
    files::write_predictions(&path, &predictions, gold.as_deref())?;
    manifest.output(&path);
    finish(manifest, out)?;
    Ok(predictions.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanBaseline {
    pub items: usize,
    pub fraction_funny: f64,
    pub ties: usize,
}

/// Majority vote per item. Writes `human.json` and `votes.json`.
pub fn human_baseline(annotations: &Path, out: &Path) -> Result<MajorityVote> {
    let mut manifest = RunManifest::new("human-baseline", &Value::Null, Vec::new());
    manifest.input(annotations)?;
    let table = files::read_annotations(annotations)?;
    if table.is_empty() {
        return Err(Error::Core(humor_core::CoreError::EmptyInput(
            "annotation table",
        )));
    }
    let vote = majority_vote(&table);
    let summary = HumanBaseline {
        items: vote.items.len(),
        fraction_funny: vote.fraction_funny,
        ties: vote.ties,
    };
    for (name, value) in [
        (
            "human.json",
            serde_json::to_value(&summary).expect("summary"),
        ),
        ("votes.json", serde_json::to_value(&vote).expect("votes")),
    ] {
        let path = out.join(name);
        files::write_json(&path, &value)?;
        manifest.output(&path);
    }
    finish(manifest, out)?;
    Ok(vote)
}

/// A scored cell: a checkpoint applied to a labeled dataset, or the
/// majority-vote funny fraction of an annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellSource {
    Model {
        checkpoint: PathBuf,
        data: PathBuf,
        #[serde(default)]
        vocab: Option<PathBuf>,
    },
    Human {
        annotations: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantRowSpec {
    pub method: String,
    #[serde(default)]
    pub body: Option<CellSource>,
    #[serde(default)]
    pub punchline: Option<CellSource>,
    #[serde(default)]
    pub full: Option<CellSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantTableSpec {
    pub title: String,
    pub rows: Vec<VariantRowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRowSpec {
    pub method: String,
    pub checkpoint: PathBuf,
    #[serde(default)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsTableSpec {
    pub title: String,
    pub data: PathBuf,
    pub rows: Vec<MetricsRowSpec>,
}

/// Report layout. Relative paths are resolved against the spec file's
/// directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSpec {
    pub variant_tables: Vec<VariantTableSpec>,
    pub metric_tables: Vec<MetricsTableSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub variant_tables: Vec<VariantTable>,
    pub metric_tables: Vec<MetricsTable>,
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let mut parts: Vec<String> = self
            .variant_tables
            .iter()
            .map(VariantTable::to_markdown)
            .collect();
        parts.extend(self.metric_tables.iter().map(MetricsTable::to_markdown));
        parts.join("\n")
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn score_cell(base: &Path, src: &CellSource, manifest: &mut RunManifest) -> Result<f64> {
    match src {
        CellSource::Model {
            checkpoint,
            data,
            vocab,
        } => {
            let data = resolve(base, data);
            manifest.input(&data)?;
            let vocab = vocab.as_ref().map(|v| resolve(base, v));
            let (model, vocab) =
                open_model(&resolve(base, checkpoint), vocab.as_deref(), manifest)?;
            let examples = files::read_dataset(&data, Variant::Full)?;
            Ok(evaluate(&model, &encode_for(&model, &vocab, &examples))?
                .metrics
                .accuracy)
        }
        CellSource::Human { annotations } => {
            let path = resolve(base, annotations);
            manifest.input(&path)?;
            Ok(majority_vote(&files::read_annotations(&path)?).fraction_funny)
        }
    }
}

/// Fills the tables of `spec_path` and writes `report.md` and `report.json`.
pub fn report(spec_path: &Path, out: &Path) -> Result<Report> {
    let spec: ReportSpec = files::read_json(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let mut manifest = RunManifest::new("report", &spec, Vec::new());
    manifest.input(spec_path)?;
    let mut report = Report::default();
    for t in &spec.variant_tables {
        let mut rows = Vec::new();
        for r in &t.rows {
            let mut row = VariantRow::new(&r.method);
            for (variant, cell) in [
                (Variant::Body, &r.body),
                (Variant::Punchline, &r.punchline),
                (Variant::Full, &r.full),
            ] {
                if let Some(src) = cell {
                    row.set(variant, score_cell(base, src, &mut manifest)?);
                }
            }
            rows.push(row);
        }
        report.variant_tables.push(VariantTable {
            title: t.title.clone(),
            rows,
        });
    }
    for t in &spec.metric_tables {
        let data = resolve(base, &t.data);
        manifest.input(&data)?;
        let examples = files::read_dataset(&data, Variant::Full)?;
        let mut rows = Vec::new();
        for r in &t.rows {
            let vocab = r.vocab.as_ref().map(|v| resolve(base, v));
            let (model, vocab) = open_model(
                &resolve(base, &r.checkpoint),
                vocab.as_deref(),
                &mut manifest,
            )?;
            let (tr, _) = transfer_eval(&model, &encode_for(&model, &vocab, &examples))?;
            rows.push(MetricsRow {
                method: r.method.clone(),
                metrics: tr.metrics,
            });
        }
        report.metric_tables.push(MetricsTable {
            title: t.title.clone(),
            rows,
        });
    }
    let md = out.join("report.md");
    files::write_bytes(&md, report.to_markdown().as_bytes())?;
    let json = out.join("report.json");
    files::write_json(&json, &report)?;
    manifest.output(&md);
    manifest.output(&json);
    finish(manifest, out)?;
    Ok(report)
}
