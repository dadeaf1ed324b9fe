use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{linear, ForwardMode, Initializer};
use crate::error::{CoreError, Result};
use crate::numcore::{BoundParams, Graph, ParamStore, Tensor, Var};
use crate::tokenizer::{TokenSequence, DEFAULT_MAX_SEQ_LEN};

/// Word-embedding CNN with max-over-time pooling followed by highway layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnHighwayConfig {
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub embed_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub num_highway_layers: usize,
    pub num_classes: usize,
}

impl Default for CnnHighwayConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            embed_dim: 64,
            filter_widths: vec![3, 4, 5],
            filters_per_width: 64,
            num_highway_layers: 1,
            num_classes: 2,
        }
    }
}

impl CnnHighwayConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(CoreError::InvalidConfig(format!("cnn_highway: {m}")));
        if self.vocab_size < 5 {
            return err("vocab_size must cover the reserved tokens plus at least one word");
        }
        if self.embed_dim == 0 || self.filters_per_width == 0 {
            return err("embed_dim and filters_per_width must be positive");
        }
        if self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return err("filter_widths must be non-empty and positive");
        }
        if self.filter_widths.iter().any(|&w| w > self.max_seq_len) {
            return err("filter widths must not exceed max_seq_len");
        }
        if self.num_classes != 2 {
            return err("num_classes must be 2");
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.filter_widths.len() * self.filters_per_width
    }

    pub fn max_width(&self) -> usize {
        self.filter_widths.iter().copied().max().unwrap_or(1)
    }
}

pub(super) fn init(c: &CnnHighwayConfig, seed: u64) -> Result<ParamStore> {
    let mut init = Initializer::new(seed);
    init.uniform("embeddings.token", c.vocab_size, c.embed_dim)?;
    for &w in &c.filter_widths {
        init.linear(&format!("conv.{w}"), w * c.embed_dim, c.filters_per_width)?;
    }
    let f = c.feature_dim();
    for l in 0..c.num_highway_layers {
        init.linear(&format!("highway.{l}.transform"), f, f)?;
        init.linear(&format!("highway.{l}.gate"), f, f)?;
    }
    init.linear("classifier", f, c.num_classes)?;
    Ok(init.params)
}

/// `y = t⊙H(x) + (1−t)⊙x` with `t = σ(x·W_t + b_t)` and `H = relu(x·W_h + b_h)`.
pub fn highway_layer(
    g: &mut Graph,
    x: Var,
    transform_w: Var,
    transform_b: Var,
    gate_w: Var,
    gate_b: Var,
) -> Result<Var> {
    let (_, cols) = g.value(x).dims2();
    for w in [transform_w, gate_w] {
        if g.value(w).shape() != [cols, cols] {
            return Err(CoreError::ShapeMismatch {
                op: "highway_layer",
                left: g.value(x).shape().to_vec(),
                right: g.value(w).shape().to_vec(),
            });
        }
    }
    let h = g.matmul(x, transform_w)?;
    let h = g.add_broadcast_row(h, transform_b)?;
    let h = g.relu(h)?;
    let t = g.matmul(x, gate_w)?;
    let t = g.add_broadcast_row(t, gate_b)?;
    let t = g.sigmoid(t)?;
    let ones = g.constant(Tensor::full(g.value(t).shape(), 1.0));
    let carry = g.sub(ones, t)?;
    let through = g.mul(t, h)?;
    let kept = g.mul(carry, x)?;
    g.add(through, kept)
}

/// Convolutions run over each sequence's own non-PAD span.
pub(super) fn forward(
    c: &CnnHighwayConfig,
    g: &mut Graph,
    bound: &BoundParams,
    batch: &[TokenSequence],
    _mode: ForwardMode<'_>,
) -> Result<Var> {
    let table = bound.var("embeddings.token")?;
    let width = c.max_width();
    let mut features = Vec::with_capacity(batch.len());
    for (index, seq) in batch.iter().enumerate() {
        let span = seq.active_len();
        if span < width {
            return Err(CoreError::SequenceTooShort {
                example: format!("#{index}"),
                span,
                width,
            });
        }
        let ids: Vec<usize> = seq.ids[..span].iter().map(|&i| i as usize).collect();
        let emb = g.gather_rows(table, &ids)?;
        let mut pooled = Vec::with_capacity(c.filter_widths.len());
        for &w in &c.filter_widths {
            let windows = g.unfold_rows(emb, w)?;
            let conv = linear(g, bound, &format!("conv.{w}"), windows)?;
            let conv = g.relu(conv)?;
            pooled.push(g.max_rows(conv)?);
        }
        features.push(if pooled.len() == 1 {
            pooled[0]
        } else {
            g.concat_cols(&pooled)?
        });
    }
    let mut x = g.concat_rows(&features)?;
    for l in 0..c.num_highway_layers {
        x = highway_layer(
            g,
            x,
            bound.var(&format!("highway.{l}.transform.weight"))?,
            bound.var(&format!("highway.{l}.transform.bias"))?,
            bound.var(&format!("highway.{l}.gate.weight"))?,
            bound.var(&format!("highway.{l}.gate.bias"))?,
        )?;
    }
    linear(g, bound, "classifier", x)
}
