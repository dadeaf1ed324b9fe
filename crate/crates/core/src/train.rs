//! Mini-batch training, prediction and zero-shot transfer evaluation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledExample};
use crate::error::{CoreError, Result};
use crate::metrics::{compute_metrics, confusion, decide, ConfusionMatrix, Metrics, Prediction};
use crate::models::{ForwardMode, Model};
use crate::numcore::{adam_step, AdamConfig, AdamState, Graph};
use crate::rng::seeded;
use crate::tokenizer::{TokenSequence, Vocabulary};

const SHUFFLE_STREAM: u64 = 0x70;
const DROPOUT_STREAM: u64 = 0x80;
const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyMetric {
    #[default]
    ValidationAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub early_metric: EarlyMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            max_epochs: 7,
            batch_size: 16,
            seed: 0,
            early_metric: EarlyMetric::ValidationAccuracy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(CoreError::InvalidConfig(
                "max_epochs must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CoreError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(CoreError::InvalidConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// A labeled example after tokenization.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub id: String,
    pub tokens: TokenSequence,
    pub label: Label,
}

pub fn encode_examples(
    vocab: &Vocabulary,
    examples: &[LabeledExample],
    max_seq_len: usize,
) -> Vec<EncodedExample> {
    examples
        .iter()
        .map(|e| EncodedExample {
            id: e.id.clone(),
            tokens: vocab.encode(&e.text, max_seq_len),
            label: e.label,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch.
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the best validation accuracy, earliest on ties.
    pub selected_epoch: usize,
}

/// Trains `model` in place. `on_epoch` sees the parameters at the end of
/// every epoch, which is where callers write checkpoints.
pub fn train<F>(
    model: &mut Model,
    train_set: &[EncodedExample],
    validation: &[EncodedExample],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainLog>
where
    F: FnMut(&EpochRecord, &Model) -> Result<()>,
{
    config.validate()?;
    if train_set.is_empty() {
        return Err(CoreError::EmptyInput("training set"));
    }
    if validation.is_empty() {
        return Err(CoreError::EmptyInput("validation set"));
    }
    let mut shuffle_rng = seeded(config.seed, SHUFFLE_STREAM);
    let mut dropout_rng = seeded(config.seed, DROPOUT_STREAM);
    let mut adam = AdamState::new(&model.params, config.adam());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(config.max_epochs);

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
            let tokens: Vec<TokenSequence> =
                chunk.iter().map(|&i| train_set[i].tokens.clone()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train_set[i].label.index()).collect();
            let non_finite = |e: CoreError| match e {
                CoreError::NonFinite { .. } => CoreError::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                },
                other => name_example(other, chunk.iter().map(|&i| train_set[i].id.as_str())),
            };
            let mut g = Graph::new();
            let bound = model.params.bind(&mut g);
            let logits = model
                .forward(
                    &mut g,
                    &bound,
                    &tokens,
                    ForwardMode::Train(&mut dropout_rng),
                )
                .map_err(non_finite)?;
            let loss = g.cross_entropy(logits, &labels).map_err(non_finite)?;
            let loss_value = g.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(CoreError::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            let mut grads = g.backward(loss).map_err(non_finite)?;
            let mut param_grads = bound.collect(&mut grads);
            adam_step(&mut model.params, &mut param_grads, &mut adam).map_err(non_finite)?;
            loss_sum += loss_value;
            batches += 1;
        }
        let val = evaluate(model, validation)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_accuracy: val.metrics.accuracy,
        };
        on_epoch(&record, model)?;
        epochs.push(record);
    }
    let selected_epoch = select_epoch(&epochs);
    Ok(TrainLog {
        epochs,
        selected_epoch,
    })
}

/// Best validation accuracy; the earliest epoch wins ties.
pub fn select_epoch(epochs: &[EpochRecord]) -> usize {
    let mut best: Option<&EpochRecord> = None;
    for r in epochs {
        if best.is_none_or(|b| r.val_accuracy > b.val_accuracy) {
            best = Some(r);
        }
    }
    best.map_or(0, |r| r.epoch)
}

/// Replaces a `#<index>` placeholder in a too-short error with the example id.
fn name_example<'a>(err: CoreError, mut ids: impl Iterator<Item = &'a str>) -> CoreError {
    match err {
        CoreError::SequenceTooShort {
            example,
            span,
            width,
        } => {
            let id = example
                .strip_prefix('#')
                .and_then(|i| i.parse::<usize>().ok())
                .and_then(|i| ids.nth(i))
                .map_or(example.clone(), String::from);
            CoreError::SequenceTooShort {
                example: id,
                span,
                width,
            }
        }
        other => other,
    }
}

/// Eval-mode predictions, in input order.
pub fn predict(model: &Model, examples: &[EncodedExample]) -> Result<Vec<Prediction>> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(EVAL_BATCH) {
        let tokens: Vec<TokenSequence> = chunk.iter().map(|e| e.tokens.clone()).collect();
        let logits = model
            .logits(&tokens)
            .map_err(|e| name_example(e, chunk.iter().map(|x| x.id.as_str())))?;
        for (e, l) in chunk.iter().zip(logits) {
            let (label, prob_positive, tie) = decide(l);
            out.push(Prediction {
                id: e.id.clone(),
                label,
                prob_positive,
                tie,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<Prediction>,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

pub fn evaluate(model: &Model, examples: &[EncodedExample]) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(CoreError::EmptyInput("evaluation set"));
    }
    let predictions = predict(model, examples)?;
    let gold: Vec<(String, Label)> = examples.iter().map(|e| (e.id.clone(), e.label)).collect();
    let confusion = confusion(&predictions, &gold)?;
    let metrics = compute_metrics(&confusion);
    Ok(Evaluation {
        predictions,
        confusion,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub examples: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub digest_before: String,
    pub digest_after: String,
    /// Always false: the external set is scored exactly as given.
    pub resampled: bool,
}

/// Scores an external dataset with no resampling and no parameter update.
pub fn transfer_eval(
    model: &Model,
    examples: &[EncodedExample],
) -> Result<(TransferReport, Vec<Prediction>)> {
    let digest_before = model.params.digest();
    let eval = evaluate(model, examples)?;
    let digest_after = model.params.digest();
    if digest_before != digest_after {
        return Err(CoreError::Checkpoint(format!(
            "parameters changed during transfer evaluation: {digest_before} != {digest_after}"
        )));
    }
    Ok((
        TransferReport {
            examples: examples.len(),
            confusion: eval.confusion,
            metrics: eval.metrics,
            digest_before,
            digest_after,
            resampled: false,
        },
        eval.predictions,
    ))
}
