use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{dropout, linear, ForwardMode, Initializer};
use crate::error::{CoreError, Result};
use crate::numcore::{scaled_dot_attention, BoundParams, Graph, ParamStore, Var};
use crate::tokenizer::{TokenSequence, DEFAULT_MAX_SEQ_LEN};

const LAYER_NORM_EPS: f64 = 1e-5;

/// Token and position tables start small: they feed a layer norm, so their
/// scale only sets how far each Adam step moves them relative to their size.
pub const EMBEDDING_INIT_BOUND: f64 = 0.005;

/// Encoder-only transformer with learned positions and `[CLS]` pooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformerConfig {
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub model_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub ffn_dim: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            model_dim: 64,
            num_heads: 4,
            num_layers: 2,
            ffn_dim: 256,
            dropout_rate: 0.1,
            num_classes: 2,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(CoreError::InvalidConfig(format!("transformer: {m}")));
        if self.vocab_size < 5 {
            return err("vocab_size must cover the reserved tokens plus at least one word");
        }
        if self.max_seq_len < 2 {
            return err("max_seq_len must be at least 2");
        }
        if self.model_dim == 0 || self.num_heads == 0 || self.num_layers == 0 || self.ffn_dim == 0 {
            return err("model_dim, num_heads, num_layers and ffn_dim must be positive");
        }
        if !self.model_dim.is_multiple_of(self.num_heads) {
            return err("model_dim must be divisible by num_heads");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return err("dropout_rate must lie in [0, 1)");
        }
        if self.num_classes != 2 {
            return err("num_classes must be 2");
        }
        Ok(())
    }
}

pub(super) fn init(c: &TransformerConfig, seed: u64) -> Result<ParamStore> {
    let d = c.model_dim;
    let mut init = Initializer::new(seed);
    init.uniform_bounded("embeddings.token", c.vocab_size, d, EMBEDDING_INIT_BOUND)?;
    init.uniform_bounded(
        "embeddings.position",
        c.max_seq_len,
        d,
        EMBEDDING_INIT_BOUND,
    )?;
    init.norm("embeddings.norm", d)?;
    for l in 0..c.num_layers {
        for proj in ["query", "key", "value", "output"] {
            init.linear(&format!("encoder.{l}.attention.{proj}"), d, d)?;
        }
        init.norm(&format!("encoder.{l}.attention_norm"), d)?;
        init.linear(&format!("encoder.{l}.ffn.input"), d, c.ffn_dim)?;
        init.linear(&format!("encoder.{l}.ffn.output"), c.ffn_dim, d)?;
        init.norm(&format!("encoder.{l}.ffn_norm"), d)?;
    }
    init.linear("classifier", d, c.num_classes)?;
    Ok(init.params)
}

fn norm(g: &mut Graph, bound: &BoundParams, prefix: &str, x: Var) -> Result<Var> {
    let gain = bound.var(&format!("{prefix}.gain"))?;
    let bias = bound.var(&format!("{prefix}.bias"))?;
    g.layer_norm(x, gain, bias, LAYER_NORM_EPS)
}

/// Every sequence is processed over the longest non-PAD span in the batch;
/// positions beyond that span are PAD for all rows and receive zero
/// attention weight, so dropping them leaves the logits unchanged.
pub(super) fn forward(
    c: &TransformerConfig,
    g: &mut Graph,
    bound: &BoundParams,
    batch: &[TokenSequence],
    mut mode: ForwardMode<'_>,
) -> Result<Var> {
    let span = batch
        .iter()
        .map(TokenSequence::active_len)
        .max()
        .unwrap_or(0)
        .max(1);
    let token_table = bound.var("embeddings.token")?;
    let position_table = bound.var("embeddings.position")?;
    let positions: Vec<usize> = (0..span).collect();
    let pos = g.gather_rows(position_table, &positions)?;
    let head_dim = c.model_dim / c.num_heads;

    let mut pooled = Vec::with_capacity(batch.len());
    for seq in batch {
        let ids: Vec<usize> = seq.ids[..span].iter().map(|&i| i as usize).collect();
        let padding: Vec<bool> = seq.attention_mask[..span].iter().map(|&m| m == 0).collect();

        let tok = g.gather_rows(token_table, &ids)?;
        let x = g.add(tok, pos)?;
        let x = norm(g, bound, "embeddings.norm", x)?;
        let mut x = dropout(g, x, c.dropout_rate, &mut mode)?;

        for l in 0..c.num_layers {
            let q = linear(g, bound, &format!("encoder.{l}.attention.query"), x)?;
            let k = linear(g, bound, &format!("encoder.{l}.attention.key"), x)?;
            let v = linear(g, bound, &format!("encoder.{l}.attention.value"), x)?;
            let mut heads = Vec::with_capacity(c.num_heads);
            for h in 0..c.num_heads {
                let (a, b) = (h * head_dim, (h + 1) * head_dim);
                let qh = g.slice_cols(q, a, b)?;
                let kh = g.slice_cols(k, a, b)?;
                let vh = g.slice_cols(v, a, b)?;
                heads.push(scaled_dot_attention(g, qh, kh, vh, &padding)?.output);
            }
            let attn = if heads.len() == 1 {
                heads[0]
            } else {
                g.concat_cols(&heads)?
            };
            let attn = linear(g, bound, &format!("encoder.{l}.attention.output"), attn)?;
            let attn = dropout(g, attn, c.dropout_rate, &mut mode)?;
            let res = g.add(x, attn)?;
            x = norm(g, bound, &format!("encoder.{l}.attention_norm"), res)?;

            let hidden = linear(g, bound, &format!("encoder.{l}.ffn.input"), x)?;
            let hidden = g.relu(hidden)?;
            let ffn = linear(g, bound, &format!("encoder.{l}.ffn.output"), hidden)?;
            let ffn = dropout(g, ffn, c.dropout_rate, &mut mode)?;
            let res = g.add(x, ffn)?;
            x = norm(g, bound, &format!("encoder.{l}.ffn_norm"), res)?;
        }
        pooled.push(g.slice_rows(x, 0, 1)?);
    }
    let cls = g.concat_rows(&pooled)?;
    linear(g, bound, "classifier", cls)
}
