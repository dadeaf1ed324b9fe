//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Every operation appends a node to the [`Graph`] holding its forward value.
//! [`Graph::backward`] walks the tape in reverse and accumulates gradients
//! into a [`Gradients`] table indexed by [`Var`].

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{matmul_nn, matmul_nt, matmul_tn, Tensor};
use crate::error::{CoreError, Result};

/// Additive bias applied to masked attention scores before the softmax.
pub const MASK_BIAS: f64 = -1e9;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Unfold {
        x: Var,
        width: usize,
    },
    MaxRows {
        x: Var,
        argmax: Vec<usize>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A single-threaded computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> CoreError {
    CoreError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn require_rank2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(CoreError::ShapeMismatch {
            op,
            left: t.shape().to_vec(),
            right: vec![],
        });
    }
    Ok(t.dims2())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Tracked leaf (a trainable parameter or an input under test).
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Untracked leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(
        &mut self,
        op_name: &'static str,
        value: Tensor,
        op: Op,
        inputs: &[Var],
    ) -> Result<Var> {
        if !value.is_finite() {
            return Err(CoreError::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = require_rank2("matmul", ta)?;
        let (k2, n) = require_rank2("matmul", tb)?;
        if k != k2 {
            return Err(mismatch("matmul", ta, tb));
        }
        let out = Tensor::from_parts(vec![m, n], matmul_nn(ta.data(), tb.data(), m, k, n));
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = require_rank2("matmul_t", ta)?;
        let (n, k2) = require_rank2("matmul_t", tb)?;
        if k != k2 {
            return Err(mismatch("matmul_t", ta, tb));
        }
        let out = Tensor::from_parts(vec![m, n], matmul_nt(ta.data(), tb.data(), m, k, n));
        self.push("matmul_t", out, Op::MatMulT(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        require_rank2("transpose", self.value(a))?;
        let out = self.value(a).transpose();
        self.push("transpose", out, Op::Transpose(a), &[a])
    }

    fn zip_same(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push(name, out, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a row vector (length = column count of `a`) to every row of `a`.
    pub fn add_broadcast_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        let (r, c) = ta.dims2();
        if tr.len() != c {
            return Err(mismatch("add_broadcast_row", ta, tr));
        }
        let mut data = ta.data().to_vec();
        for i in 0..r {
            for (x, &b) in data[i * c..(i + 1) * c].iter_mut().zip(tr.data()) {
                *x += b;
            }
        }
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push("add_broadcast_row", out, Op::AddRow(a, row), &[a, row])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * factor).collect();
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push("scale", out, Op::Scale(a, factor), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { 0.0 })
            .collect();
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push("relu", out, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| sigmoid(x)).collect();
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push("sigmoid", out, Op::Sigmoid(a), &[a])
    }

    /// Softmax along `axis` of a rank-2 tensor (rank-1 tensors use axis 0 as
    /// their only axis).
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        match (t.rank(), axis) {
            (1, 0) | (2, 1) => self.softmax_rows(a),
            (2, 0) => {
                let at = self.transpose(a)?;
                let s = self.softmax_rows(at)?;
                self.transpose(s)
            }
            _ => Err(CoreError::ShapeMismatch {
                op: "softmax",
                left: t.shape().to_vec(),
                right: vec![axis],
            }),
        }
    }

    fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2();
        let mut data = ta.data().to_vec();
        for i in 0..r {
            softmax_in_place(&mut data[i * c..(i + 1) * c]);
        }
        let out = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push("softmax", out, Op::SoftmaxRows(a), &[a])
    }

    /// Row-wise layer normalisation followed by the affine `gain`/`bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        let (r, c) = tx.dims2();
        if tg.len() != c {
            return Err(mismatch("layer_norm", tx, tg));
        }
        if tb.len() != c {
            return Err(mismatch("layer_norm", tx, tb));
        }
        let mut normalized = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = tx.row(i);
            let mut mean = row.iter().sum::<f64>() / c as f64;
            // second pass removes the rounding residue of the first
            mean += row.iter().map(|v| v - mean).sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let s = 1.0 / libm::sqrt(var + eps);
            inv_std[i] = s;
            for j in 0..c {
                let n = (row[j] - mean) * s;
                normalized[i * c + j] = n;
                out[i * c + j] = n * tg.data()[j] + tb.data()[j];
            }
        }
        let out = Tensor::from_parts(tx.shape().to_vec(), out);
        self.push(
            "layer_norm",
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
            &[x, gain, bias],
        )
    }

    /// Row lookup: output row `i` is `table[ids[i]]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tt = self.value(table);
        let (r, c) = require_rank2("gather_rows", tt)?;
        if ids.is_empty() {
            return Err(CoreError::EmptyInput("gather_rows ids"));
        }
        let mut data = Vec::with_capacity(ids.len() * c);
        for &id in ids {
            if id >= r {
                return Err(CoreError::ShapeMismatch {
                    op: "gather_rows",
                    left: tt.shape().to_vec(),
                    right: vec![id],
                });
            }
            data.extend_from_slice(tt.row(id));
        }
        let out = Tensor::from_parts(vec![ids.len(), c], data);
        self.push(
            "gather_rows",
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        )
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = require_rank2("slice_rows", tx)?;
        if start >= end || end > r {
            return Err(CoreError::ShapeMismatch {
                op: "slice_rows",
                left: tx.shape().to_vec(),
                right: vec![start, end],
            });
        }
        let out = Tensor::from_parts(vec![end - start, c], tx.data()[start * c..end * c].to_vec());
        self.push("slice_rows", out, Op::SliceRows { x, start }, &[x])
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = require_rank2("slice_cols", tx)?;
        if start >= end || end > c {
            return Err(CoreError::ShapeMismatch {
                op: "slice_cols",
                left: tx.shape().to_vec(),
                right: vec![start, end],
            });
        }
        let w = end - start;
        let mut data = Vec::with_capacity(r * w);
        for i in 0..r {
            data.extend_from_slice(&tx.row(i)[start..end]);
        }
        let out = Tensor::from_parts(vec![r, w], data);
        self.push("slice_cols", out, Op::SliceCols { x, start }, &[x])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(CoreError::EmptyInput("concat_rows"))?;
        let (_, c) = require_rank2("concat_rows", self.value(*first))?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            let (r, pc) = require_rank2("concat_rows", t)?;
            if pc != c {
                return Err(mismatch("concat_rows", self.value(*first), t));
            }
            rows += r;
            data.extend_from_slice(t.data());
        }
        let out = Tensor::from_parts(vec![rows, c], data);
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()), parts)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(CoreError::EmptyInput("concat_cols"))?;
        let (r, _) = require_rank2("concat_cols", self.value(*first))?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = self.value(p);
            let (pr, pc) = require_rank2("concat_cols", t)?;
            if pr != r {
                return Err(mismatch("concat_cols", self.value(*first), t));
            }
            widths.push(pc);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let out = Tensor::from_parts(vec![r, total], data);
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Sliding windows over rows: output row `t` concatenates rows
    /// `t..t+width` of `x`, giving `(rows − width + 1) × (width·cols)`.
    pub fn unfold_rows(&mut self, x: Var, width: usize) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = require_rank2("unfold_rows", tx)?;
        if width == 0 || width > r {
            return Err(CoreError::ShapeMismatch {
                op: "unfold_rows",
                left: tx.shape().to_vec(),
                right: vec![width],
            });
        }
        let windows = r - width + 1;
        let mut data = Vec::with_capacity(windows * width * c);
        for t in 0..windows {
            data.extend_from_slice(&tx.data()[t * c..(t + width) * c]);
        }
        let out = Tensor::from_parts(vec![windows, width * c], data);
        self.push("unfold_rows", out, Op::Unfold { x, width }, &[x])
    }

    /// Column-wise maximum over rows (max-over-time pooling), `1 × cols`.
    /// Ties route the gradient to the earliest row.
    pub fn max_rows(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        let (r, c) = require_rank2("max_rows", tx)?;
        let mut argmax = vec![0usize; c];
        let mut data = tx.row(0).to_vec();
        for i in 1..r {
            for j in 0..c {
                let v = tx.get(i, j);
                if v > data[j] {
                    data[j] = v;
                    argmax[j] = i;
                }
            }
        }
        let out = Tensor::from_parts(vec![1, c], data);
        self.push("max_rows", out, Op::MaxRows { x, argmax }, &[x])
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax of
    /// `logits` (`batch × classes`).
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let tl = self.value(logits);
        let (b, c) = require_rank2("cross_entropy", tl)?;
        if labels.len() != b {
            return Err(CoreError::ShapeMismatch {
                op: "cross_entropy",
                left: tl.shape().to_vec(),
                right: vec![labels.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(CoreError::LabelOutOfRange {
                label: bad,
                classes: c,
            });
        }
        let mut probs = tl.data().to_vec();
        let mut loss = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = tl.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>());
            loss += lse - row[label];
            softmax_in_place(&mut probs[i * c..(i + 1) * c]);
        }
        let out = Tensor::scalar(loss / b as f64);
        self.push(
            "cross_entropy",
            out,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            &[logits],
        )
    }

    /// Reverse-mode sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(CoreError::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lt.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, contribution: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn accumulate_with(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.value(v).shape()));
        }
        if let Some(t) = slot {
            f(t.data_mut());
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = ta.dims2();
                let n = tb.dims2().1;
                if self.requires_grad(*a) {
                    let da = matmul_nt(gd, tb.data(), m, n, k);
                    self.accumulate(grads, *a, Tensor::from_parts(ta.shape().to_vec(), da));
                }
                if self.requires_grad(*b) {
                    let db = matmul_tn(ta.data(), gd, m, k, n);
                    self.accumulate(grads, *b, Tensor::from_parts(tb.shape().to_vec(), db));
                }
            }
            Op::MatMulT(a, b) => {
                // C = A·Bᵀ, A: m×k, B: n×k
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = ta.dims2();
                let n = tb.dims2().0;
                if self.requires_grad(*a) {
                    let da = matmul_nn(gd, tb.data(), m, n, k);
                    self.accumulate(grads, *a, Tensor::from_parts(ta.shape().to_vec(), da));
                }
                if self.requires_grad(*b) {
                    let db = matmul_tn(gd, ta.data(), m, n, k);
                    self.accumulate(grads, *b, Tensor::from_parts(tb.shape().to_vec(), db));
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                let neg = gd.iter().map(|v| -v).collect();
                self.accumulate(grads, *b, Tensor::from_parts(g.shape().to_vec(), neg));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    let da = gd.iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                    self.accumulate(grads, *a, Tensor::from_parts(ta.shape().to_vec(), da));
                }
                if self.requires_grad(*b) {
                    let db = gd.iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                    self.accumulate(grads, *b, Tensor::from_parts(tb.shape().to_vec(), db));
                }
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.clone());
                let (r, c) = g.dims2();
                self.accumulate_with(grads, *row, |dst| {
                    for i in 0..r {
                        for (d, v) in dst.iter_mut().zip(&gd[i * c..(i + 1) * c]) {
                            *d += v;
                        }
                    }
                });
            }
            Op::Scale(a, factor) => {
                let d = gd.iter().map(|v| v * factor).collect();
                self.accumulate(grads, *a, Tensor::from_parts(g.shape().to_vec(), d));
            }
            Op::Relu(a) => {
                let ta = self.value(*a);
                let d = gd
                    .iter()
                    .zip(ta.data())
                    .map(|(&gv, &x)| if x > 0.0 { gv } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, Tensor::from_parts(g.shape().to_vec(), d));
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                let d = gd
                    .iter()
                    .zip(y)
                    .map(|(&gv, &s)| gv * s * (1.0 - s))
                    .collect();
                self.accumulate(grads, *a, Tensor::from_parts(g.shape().to_vec(), d));
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let (r, c) = y.dims2();
                let mut d = vec![0.0; r * c];
                for i in 0..r {
                    let yr = y.row(i);
                    let gr = &gd[i * c..(i + 1) * c];
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        d[i * c + j] = yr[j] * (gr[j] - dot);
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(g.shape().to_vec(), d));
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let (r, c) = g.dims2();
                let gv = self.value(*gain).data();
                self.accumulate_with(grads, *gain, |dst| {
                    for i in 0..r {
                        for j in 0..c {
                            dst[j] += gd[i * c + j] * normalized[i * c + j];
                        }
                    }
                });
                self.accumulate_with(grads, *bias, |dst| {
                    for i in 0..r {
                        for j in 0..c {
                            dst[j] += gd[i * c + j];
                        }
                    }
                });
                if self.requires_grad(*x) {
                    let mut dx = vec![0.0; r * c];
                    let n = c as f64;
                    for i in 0..r {
                        let xh = &normalized[i * c..(i + 1) * c];
                        let dxh: Vec<f64> = (0..c).map(|j| gd[i * c + j] * gv[j]).collect();
                        let sum: f64 = dxh.iter().sum();
                        let dot: f64 = dxh.iter().zip(xh).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            dx[i * c + j] = inv_std[i] / n * (n * dxh[j] - sum - xh[j] * dot);
                        }
                    }
                    self.accumulate(grads, *x, Tensor::from_parts(g.shape().to_vec(), dx));
                }
            }
            Op::Gather { table, ids } => {
                let c = g.dims2().1;
                self.accumulate_with(grads, *table, |dst| {
                    for (i, &id) in ids.iter().enumerate() {
                        for (d, v) in dst[id * c..(id + 1) * c]
                            .iter_mut()
                            .zip(&gd[i * c..(i + 1) * c])
                        {
                            *d += v;
                        }
                    }
                });
            }
            Op::SliceRows { x, start } => {
                let c = g.dims2().1;
                let off = start * c;
                self.accumulate_with(grads, *x, |dst| {
                    for (d, v) in dst[off..off + gd.len()].iter_mut().zip(gd) {
                        *d += v;
                    }
                });
            }
            Op::SliceCols { x, start } => {
                let (r, w) = g.dims2();
                let c = self.value(*x).dims2().1;
                self.accumulate_with(grads, *x, |dst| {
                    for i in 0..r {
                        for j in 0..w {
                            dst[i * c + start + j] += gd[i * w + j];
                        }
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    let piece = Tensor::from_parts(
                        self.value(p).shape().to_vec(),
                        gd[off..off + len].to_vec(),
                    );
                    self.accumulate(grads, p, piece);
                    off += len;
                }
            }
            Op::ConcatCols(parts) => {
                let (r, total) = g.dims2();
                let mut col = 0;
                for &p in parts {
                    let w = self.value(p).dims2().1;
                    let mut piece = Vec::with_capacity(r * w);
                    for i in 0..r {
                        piece.extend_from_slice(&gd[i * total + col..i * total + col + w]);
                    }
                    self.accumulate(
                        grads,
                        p,
                        Tensor::from_parts(self.value(p).shape().to_vec(), piece),
                    );
                    col += w;
                }
            }
            Op::Unfold { x, width } => {
                let (windows, wc) = g.dims2();
                let c = wc / width;
                self.accumulate_with(grads, *x, |dst| {
                    for t in 0..windows {
                        for (d, v) in dst[t * c..(t + width) * c]
                            .iter_mut()
                            .zip(&gd[t * wc..(t + 1) * wc])
                        {
                            *d += v;
                        }
                    }
                });
            }
            Op::MaxRows { x, argmax } => {
                let c = argmax.len();
                self.accumulate_with(grads, *x, |dst| {
                    for (j, &i) in argmax.iter().enumerate() {
                        dst[i * c + j] += gd[j];
                    }
                });
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let b = labels.len();
                let c = probs.len() / b;
                let scale = gd[0] / b as f64;
                let mut d: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (i, &l) in labels.iter().enumerate() {
                    d[i * c + l] -= scale;
                }
                self.accumulate(grads, *logits, Tensor::from_parts(vec![b, c], d));
            }
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
