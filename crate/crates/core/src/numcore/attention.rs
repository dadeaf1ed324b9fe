use alloc::vec::Vec;

use super::graph::{Graph, Var, MASK_BIAS};
use super::tensor::Tensor;
use crate::error::{CoreError, Result};

/// Output of [`scaled_dot_attention`] together with its weight matrix.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub output: Var,
    pub weights: Var,
}

/// `softmax(Q·Kᵀ/√d_k + mask_bias)·V`.
///
/// `key_padding[j] == true` marks key position `j` as padding; its score gets
/// [`MASK_BIAS`] added before the softmax.
pub fn scaled_dot_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    key_padding: &[bool],
) -> Result<Attention> {
    let (qs, ks, vs) = (g.value(q).dims2(), g.value(k).dims2(), g.value(v).dims2());
    if qs.1 != ks.1 {
        return Err(CoreError::ShapeMismatch {
            op: "scaled_dot_attention",
            left: g.value(q).shape().to_vec(),
            right: g.value(k).shape().to_vec(),
        });
    }
    if ks.0 != vs.0 || key_padding.len() != ks.0 {
        return Err(CoreError::ShapeMismatch {
            op: "scaled_dot_attention",
            left: g.value(k).shape().to_vec(),
            right: g.value(v).shape().to_vec(),
        });
    }
    let d_k = qs.1 as f64;
    let scores = g.matmul_t(q, k)?;
    let scores = g.scale(scores, 1.0 / libm::sqrt(d_k))?;
    let scores = if key_padding.iter().any(|&m| m) {
        let bias: Vec<f64> = key_padding
            .iter()
            .map(|&m| if m { MASK_BIAS } else { 0.0 })
            .collect();
        let bias = g.constant(Tensor::from_parts(alloc::vec![1, bias.len()], bias));
        g.add_broadcast_row(scores, bias)?
    } else {
        scores
    };
    let weights = g.softmax(scores, 1)?;
    let output = g.matmul(weights, v)?;
    Ok(Attention { output, weights })
}
