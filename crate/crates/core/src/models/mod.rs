//! The two classifiers and their shared plumbing.

mod cnn;
mod transformer;

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::numcore::{BoundParams, Graph, ParamStore, Tensor, Var};
use crate::rng::seeded;
use crate::tokenizer::TokenSequence;

pub use cnn::{highway_layer, CnnHighwayConfig};
pub use transformer::{TransformerConfig, EMBEDDING_INIT_BOUND};

/// Dropout is applied only in [`ForwardMode::Train`].
pub enum ForwardMode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl ForwardMode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, ForwardMode::Train(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Transformer(TransformerConfig),
    CnnHighway(CnnHighwayConfig),
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Transformer(c) => c.validate(),
            ModelConfig::CnnHighway(c) => c.validate(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            ModelConfig::Transformer(c) => c.vocab_size,
            ModelConfig::CnnHighway(c) => c.vocab_size,
        }
    }

    pub fn max_seq_len(&self) -> usize {
        match self {
            ModelConfig::Transformer(c) => c.max_seq_len,
            ModelConfig::CnnHighway(c) => c.max_seq_len,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelConfig::Transformer(_) => "transformer",
            ModelConfig::CnnHighway(_) => "cnn_highway",
        }
    }
}

/// A classifier configuration together with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl Model {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = match &config {
            ModelConfig::Transformer(c) => transformer::init(c, seed)?,
            ModelConfig::CnnHighway(c) => cnn::init(c, seed)?,
        };
        Ok(Self { config, params })
    }

    /// Wraps loaded weights after checking every expected tensor is present
    /// with the expected shape.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let reference = Self::init(config.clone(), 0)?;
        if reference.params.len() != params.len() {
            return Err(CoreError::InvalidConfig(format!(
                "checkpoint has {} tensors, config expects {}",
                params.len(),
                reference.params.len()
            )));
        }
        for (name, t) in reference.params.iter() {
            let got = params
                .get(name)
                .ok_or_else(|| CoreError::UnknownParameter(name.into()))?;
            if got.shape() != t.shape() {
                return Err(CoreError::ShapeMismatch {
                    op: "load parameters",
                    left: t.shape().to_vec(),
                    right: got.shape().to_vec(),
                });
            }
        }
        Ok(Self { config, params })
    }

    /// `batch × num_classes` logits.
    pub fn forward(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        batch: &[TokenSequence],
        mode: ForwardMode<'_>,
    ) -> Result<Var> {
        if batch.is_empty() {
            return Err(CoreError::EmptyInput("batch"));
        }
        validate_batch(batch, self.config.vocab_size(), self.config.max_seq_len())?;
        match &self.config {
            ModelConfig::Transformer(c) => transformer::forward(c, g, bound, batch, mode),
            ModelConfig::CnnHighway(c) => cnn::forward(c, g, bound, batch, mode),
        }
    }

    /// Inference-only logits, one row per sequence.
    pub fn logits(&self, batch: &[TokenSequence]) -> Result<Vec<[f64; 2]>> {
        let mut g = Graph::new();
        let bound = self.params.bind_frozen(&mut g);
        let out = self.forward(&mut g, &bound, batch, ForwardMode::Eval)?;
        let t = g.value(out);
        Ok((0..batch.len())
            .map(|i| [t.get(i, 0), t.get(i, 1)])
            .collect())
    }
}

fn validate_batch(batch: &[TokenSequence], vocab_size: usize, max_seq_len: usize) -> Result<()> {
    for seq in batch {
        if seq.ids.len() != max_seq_len || seq.attention_mask.len() != max_seq_len {
            return Err(CoreError::ShapeMismatch {
                op: "forward",
                left: alloc::vec![max_seq_len],
                right: alloc::vec![seq.ids.len()],
            });
        }
        if let Some(&id) = seq.ids.iter().find(|&&id| id as usize >= vocab_size) {
            return Err(CoreError::TokenIdOutOfRange {
                id,
                size: vocab_size,
            });
        }
    }
    Ok(())
}

/// Uniform initialisation in `±√(6/(fan_in+fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

pub(crate) struct Initializer {
    rng: ChaCha8Rng,
    pub params: ParamStore,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: seeded(seed, 0x60),
            params: ParamStore::new(),
        }
    }

    pub fn uniform(&mut self, name: &str, rows: usize, cols: usize) -> Result<()> {
        self.uniform_bounded(name, rows, cols, xavier_bound(rows, cols))
    }

    /// Uniform in `±bound`.
    pub fn uniform_bounded(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        bound: f64,
    ) -> Result<()> {
        let data = (0..rows * cols)
            .map(|_| self.rng.random_range(-bound..=bound))
            .collect();
        self.params
            .insert(name, Tensor::new(alloc::vec![rows, cols], data)?)
    }

    pub fn constant(&mut self, name: &str, len: usize, value: f64) -> Result<()> {
        self.params.insert(name, Tensor::full(&[len], value))
    }

    /// `weight [rows×cols]` plus zero `bias [cols]`.
    pub fn linear(&mut self, prefix: &str, rows: usize, cols: usize) -> Result<()> {
        self.uniform(&format!("{prefix}.weight"), rows, cols)?;
        self.constant(&format!("{prefix}.bias"), cols, 0.0)
    }

    pub fn norm(&mut self, prefix: &str, len: usize) -> Result<()> {
        self.constant(&format!("{prefix}.gain"), len, 1.0)?;
        self.constant(&format!("{prefix}.bias"), len, 0.0)
    }
}

/// `x·W + b` using `{prefix}.weight` / `{prefix}.bias`.
pub(crate) fn linear(g: &mut Graph, bound: &BoundParams, prefix: &str, x: Var) -> Result<Var> {
    let w = bound.var(&format!("{prefix}.weight"))?;
    let b = bound.var(&format!("{prefix}.bias"))?;
    let y = g.matmul(x, w)?;
    g.add_broadcast_row(y, b)
}

/// Inverted dropout: kept units are scaled by `1/(1−rate)`.
pub(crate) fn dropout(g: &mut Graph, x: Var, rate: f64, mode: &mut ForwardMode<'_>) -> Result<Var> {
    let ForwardMode::Train(rng) = mode else {
        return Ok(x);
    };
    if rate <= 0.0 {
        return Ok(x);
    }
    let shape = g.value(x).shape().to_vec();
    let keep = 1.0 / (1.0 - rate);
    let n = g.value(x).len();
    let mask: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect();
    let mask = g.constant(Tensor::new(shape, mask)?);
    g.mul(x, mask)
}
