//! On-disk formats: dataset and prediction CSVs, vocabulary files,
//! checkpoints with JSON sidecars, run logs, annotation tables, sentence
//! lists and run manifests.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use humor_core::corpus::{Label, LabeledExample, Variant};
use humor_core::metrics::{AnnotationTable, Prediction};
use humor_core::models::{Model, ModelConfig};
use humor_core::numcore::checkpoint;
use humor_core::tokenizer::Vocabulary;
use humor_core::train::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable value");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e))
}

fn label_from_field(path: &Path, line: u64, field: &str) -> Result<Label> {
    match field.trim() {
        "0" => Ok(Label::NotFunny),
        "1" => Ok(Label::Funny),
        other => Err(Error::parse(
            path,
            line,
            format!("label must be 0 or 1, got {other:?}"),
        )),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::parse(path, line, format!("{kind:?}")),
    }
}

fn csv_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let found = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(Error::parse(
            path,
            1,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(rows)
}

/// `id,label,text` with label 1 for funny.
pub fn write_dataset(path: &Path, examples: &[LabeledExample]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["id", "label", "text"])
        .map_err(|e| csv_err(path, e))?;
    for e in examples {
        w.write_record([e.id.as_str(), &e.label.index().to_string(), e.text.as_str()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path, variant: Variant) -> Result<Vec<LabeledExample>> {
    csv_rows(path, &["id", "label", "text"])?
        .into_iter()
        .map(|(line, r)| {
            let id = r.get(0).unwrap_or_default();
            if id.is_empty() {
                return Err(Error::parse(path, line, "empty id"));
            }
            Ok(LabeledExample {
                id: id.to_string(),
                label: label_from_field(path, line, r.get(1).unwrap_or_default())?,
                text: r.get(2).unwrap_or_default().to_string(),
                variant,
            })
        })
        .collect()
}

/// `id,gold,pred,prob_positive`; `gold` is empty when unknown.
pub fn write_predictions(
    path: &Path,
    predictions: &[Prediction],
    gold: Option<&[(String, Label)]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "gold", "pred", "prob_positive"])
        .map_err(|e| csv_err(path, e))?;
    for (i, p) in predictions.iter().enumerate() {
        let g = gold.map_or(String::new(), |g| g[i].1.index().to_string());
        w.write_record([
            p.id.as_str(),
            g.as_str(),
            &p.label.index().to_string(),
            &format!("{:.6}", p.prob_positive),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    write_bytes(path, &bytes)
}

pub fn read_annotations(path: &Path) -> Result<AnnotationTable> {
    let mut table = AnnotationTable::new();
    for (line, r) in csv_rows(path, &["item_id", "annotator_id", "label"])? {
        let item = r.get(0).unwrap_or_default();
        if item.is_empty() {
            return Err(Error::parse(path, line, "empty item_id"));
        }
        table.add(
            item,
            label_from_field(path, line, r.get(2).unwrap_or_default())?,
        );
    }
    Ok(table)
}

/// One sentence per line; blank lines are skipped.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::parse(path, i as u64 + 1, e))?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

const VOCAB_HEADER: &str = "# humor vocabulary\n\
# ids 0-3 are reserved: [PAD] [UNK] [CLS] [SEP]\n\
# the n-th token line below (counting from 0) has id n + 4\n";

pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut out = String::from(VOCAB_HEADER);
    out.push_str(&format!(
        "# max_size={} min_freq={}\n",
        vocab.max_size(),
        vocab.min_freq()
    ));
    for t in vocab.learned_tokens() {
        out.push_str(t);
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut max_size, mut min_freq) = (None, None);
    let mut tokens = Vec::new();
    // comments only in the leading header, so a `#` token is still a token
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let header = tokens.is_empty().then(|| line.strip_prefix("# ")).flatten();
        if let Some(comment) = header {
            for kv in comment.split_whitespace() {
                let parse = |v: &str| {
                    v.parse::<usize>()
                        .map_err(|e| Error::parse(path, line_no, e))
                };
                if let Some(v) = kv.strip_prefix("max_size=") {
                    max_size = Some(parse(v)?);
                } else if let Some(v) = kv.strip_prefix("min_freq=") {
                    min_freq = Some(parse(v)?);
                }
            }
            continue;
        }
        tokens.push(line.to_string());
    }
    let max_size = max_size.ok_or_else(|| Error::parse(path, 0, "missing `# max_size=` header"))?;
    let min_freq = min_freq.ok_or_else(|| Error::parse(path, 0, "missing `# min_freq=` header"))?;
    Vocabulary::from_tokens(tokens, max_size, min_freq).map_err(|e| Error::parse(path, 0, e))
}

/// Content hash of the id → token mapping, independent of file comments.
pub fn vocab_digest(vocab: &Vocabulary) -> String {
    let mut h = Sha256::new();
    for t in vocab.learned_tokens() {
        h.update(t.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub epoch: usize,
    pub vocab_digest: String,
    pub params_digest: String,
}

pub fn sidecar_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_checkpoint(path: &Path, model: &Model, meta: &CheckpointMeta) -> Result<()> {
    write_bytes(path, &checkpoint::encode(&model.params))?;
    write_json(&sidecar_path(path), meta)
}

/// Loads a checkpoint and, when `vocab` is given, checks it is the one the
/// model was trained with.
pub fn load_checkpoint(path: &Path, vocab: Option<&Vocabulary>) -> Result<(Model, CheckpointMeta)> {
    let meta: CheckpointMeta = read_json(&sidecar_path(path))?;
    if let Some(v) = vocab {
        let found = vocab_digest(v);
        if found != meta.vocab_digest {
            return Err(Error::Mismatch {
                expected: format!("vocabulary {}", meta.vocab_digest),
                found: format!("vocabulary {found}"),
            });
        }
        if v.len() != meta.model.vocab_size() {
            return Err(Error::Mismatch {
                expected: format!("vocab_size {}", meta.model.vocab_size()),
                found: format!("vocab_size {}", v.len()),
            });
        }
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let params = checkpoint::decode(&bytes)?;
    let found = params.digest();
    if found != meta.params_digest {
        return Err(Error::Mismatch {
            expected: format!("parameters {}", meta.params_digest),
            found: format!("parameters {found}"),
        });
    }
    Ok((Model::from_params(meta.model.clone(), params)?, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub checkpoint_path: PathBuf,
}

pub struct JsonlWriter {
    path: PathBuf,
    w: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.into(),
            w: BufWriter::new(file),
        })
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let line = serde_json::to_string(value).expect("serialisable value");
        writeln!(self.w, "{line}").map_err(|e| Error::io(&self.path, e))?;
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| Error::parse(path, line_no, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e))?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Written once per command as `manifest.json` in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seeds: Vec<u64>) -> Self {
        Self {
            command: command.into(),
            config: serde_json::to_value(config).expect("serialisable config"),
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest {
            path: path.into(),
            sha256: file_digest(path)?,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.into());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}
