//! Central finite-difference checks of every differentiable operation and of
//! both classifiers end to end.

use humor_core::models::{
    highway_layer, CnnHighwayConfig, ForwardMode, Model, ModelConfig, TransformerConfig,
};
use humor_core::numcore::gradcheck::check_gradients;
use humor_core::numcore::{scaled_dot_attention, BoundParams, Graph, ParamStore, Tensor, Var};
use humor_core::tokenizer::{TokenSequence, CLS, PAD, SEP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const ZERO_GRADIENT: f64 = 1e-9;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Values bounded away from zero so relu kinks stay outside the probe step.
fn random_off_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let mut t = random(rng, shape);
    for v in t.data_mut() {
        *v = v.signum() * (0.1 + v.abs());
    }
    t
}

/// `Σ w ⊙ y` for a fixed random weighting `w`, reduced with two matmuls.
fn weighted_sum(g: &mut Graph, y: Var, seed: u64) -> Var {
    let shape = g.value(y).shape().to_vec();
    let (r, c) = g.value(y).dims2();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = g.constant(random(&mut rng, &shape));
    let wy = g.mul(y, w).unwrap();
    let left = g.constant(Tensor::full(&[1, r], 1.0));
    let right = g.constant(Tensor::full(&[c, 1], 1.0));
    let s = g.matmul(left, wy).unwrap();
    g.matmul(s, right).unwrap()
}

fn max_rel_error<F>(store: &ParamStore, loss: F) -> f64
where
    F: Fn(&mut Graph, &BoundParams) -> Var,
{
    let check = check_gradients(store, H, ZERO_GRADIENT, |g, b| Ok(loss(g, b))).unwrap();
    assert_eq!(check.params_checked, store.scalar_count());
    check.worst
}

fn store(entries: Vec<(&str, Tensor)>) -> ParamStore {
    let mut s = ParamStore::new();
    for (n, t) in entries {
        s.insert(n, t).unwrap();
    }
    s
}

fn assert_below(what: &str, err: f64, tol: f64) {
    assert!(err < tol, "{what}: relative error {err:e} ≥ {tol:e}");
}

#[test]
fn matmul_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = store(vec![
        ("a", random(&mut rng, &[3, 4])),
        ("b", random(&mut rng, &[4, 2])),
        ("c", random(&mut rng, &[2, 4])),
    ]);
    let e = max_rel_error(&s, |g, b| {
        let y = g.matmul(b.var("a").unwrap(), b.var("b").unwrap()).unwrap();
        weighted_sum(g, y, 10)
    });
    assert_below("matmul", e, 1e-6);
    let e = max_rel_error(&s, |g, b| {
        let y = g
            .matmul_t(b.var("a").unwrap(), b.var("c").unwrap())
            .unwrap();
        weighted_sum(g, y, 11)
    });
    assert_below("matmul_t", e, 1e-6);
    let e = max_rel_error(&s, |g, b| {
        let y = g.transpose(b.var("a").unwrap()).unwrap();
        weighted_sum(g, y, 12)
    });
    assert_below("transpose", e, 1e-6);
}

#[test]
fn elementwise_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = store(vec![
        ("x", random_off_zero(&mut rng, &[3, 5])),
        ("y", random(&mut rng, &[3, 5])),
        ("r", random(&mut rng, &[5])),
    ]);
    type Op = fn(&mut Graph, Var, Var, Var) -> Var;
    let ops: [(&str, Op); 8] = [
        ("add", |g, x, y, _| g.add(x, y).unwrap()),
        ("sub", |g, x, y, _| g.sub(x, y).unwrap()),
        ("mul", |g, x, y, _| g.mul(x, y).unwrap()),
        ("add_broadcast_row", |g, x, _, r| {
            g.add_broadcast_row(x, r).unwrap()
        }),
        ("scale", |g, x, _, _| g.scale(x, -1.7).unwrap()),
        ("relu", |g, x, _, _| g.relu(x).unwrap()),
        ("sigmoid", |g, x, _, _| g.sigmoid(x).unwrap()),
        ("mul_self", |g, x, _, _| g.mul(x, x).unwrap()),
    ];
    for (i, (name, op)) in ops.iter().enumerate() {
        let e = max_rel_error(&s, |g, b| {
            let y = op(
                g,
                b.var("x").unwrap(),
                b.var("y").unwrap(),
                b.var("r").unwrap(),
            );
            weighted_sum(g, y, 20 + i as u64)
        });
        assert_below(name, e, 1e-6);
    }
}

#[test]
fn softmax_both_axes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = store(vec![("x", random(&mut rng, &[4, 6]))]);
    for axis in [0, 1] {
        let e = max_rel_error(&s, |g, b| {
            let y = g.softmax(b.var("x").unwrap(), axis).unwrap();
            weighted_sum(g, y, 30 + axis as u64)
        });
        assert_below("softmax", e, 1e-6);
    }
}

#[test]
fn layer_norm_grad() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = store(vec![
        ("x", random(&mut rng, &[3, 8])),
        ("gain", random(&mut rng, &[8])),
        ("bias", random(&mut rng, &[8])),
    ]);
    let e = max_rel_error(&s, |g, b| {
        let y = g
            .layer_norm(
                b.var("x").unwrap(),
                b.var("gain").unwrap(),
                b.var("bias").unwrap(),
                1e-5,
            )
            .unwrap();
        weighted_sum(g, y, 40)
    });
    assert_below("layer_norm", e, 1e-5);
}

#[test]
fn indexing_and_layout_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = store(vec![
        ("t", random(&mut rng, &[6, 4])),
        ("u", random(&mut rng, &[2, 4])),
        ("v", random(&mut rng, &[6, 3])),
    ]);
    type Op = fn(&mut Graph, Var, Var, Var) -> Var;
    let ops: [(&str, Op); 7] = [
        ("gather_rows", |g, t, _, _| {
            g.gather_rows(t, &[0, 3, 3, 5, 1]).unwrap()
        }),
        ("slice_rows", |g, t, _, _| g.slice_rows(t, 1, 4).unwrap()),
        ("slice_cols", |g, t, _, _| g.slice_cols(t, 1, 3).unwrap()),
        ("concat_rows", |g, t, u, _| {
            g.concat_rows(&[t, u, t]).unwrap()
        }),
        ("concat_cols", |g, t, _, v| g.concat_cols(&[t, v]).unwrap()),
        ("unfold_rows", |g, t, _, _| g.unfold_rows(t, 3).unwrap()),
        ("max_rows", |g, t, _, _| g.max_rows(t).unwrap()),
    ];
    for (i, (name, op)) in ops.iter().enumerate() {
        let e = max_rel_error(&s, |g, b| {
            let y = op(
                g,
                b.var("t").unwrap(),
                b.var("u").unwrap(),
                b.var("v").unwrap(),
            );
            weighted_sum(g, y, 50 + i as u64)
        });
        assert_below(name, e, 1e-6);
    }
}

#[test]
fn cross_entropy_grad() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = store(vec![("logits", random(&mut rng, &[5, 2]))]);
    let e = max_rel_error(&s, |g, b| {
        g.cross_entropy(b.var("logits").unwrap(), &[0, 1, 1, 0, 1])
            .unwrap()
    });
    assert_below("cross_entropy", e, 1e-5);
}

#[test]
fn attention_grad_with_mask() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = store(vec![
        ("q", random(&mut rng, &[4, 3])),
        ("k", random(&mut rng, &[4, 3])),
        ("v", random(&mut rng, &[4, 3])),
    ]);
    let e = max_rel_error(&s, |g, b| {
        let a = scaled_dot_attention(
            g,
            b.var("q").unwrap(),
            b.var("k").unwrap(),
            b.var("v").unwrap(),
            &[false, false, true, false],
        )
        .unwrap();
        weighted_sum(g, a.output, 70)
    });
    assert_below("attention", e, 1e-6);
}

#[test]
fn highway_grad() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = store(vec![
        ("x", random(&mut rng, &[3, 4])),
        ("wt", random(&mut rng, &[4, 4])),
        ("bt", random(&mut rng, &[4])),
        ("wg", random(&mut rng, &[4, 4])),
        ("bg", random(&mut rng, &[4])),
    ]);
    let e = max_rel_error(&s, |g, b| {
        let v = |n: &str| b.var(n).unwrap();
        let y = highway_layer(g, v("x"), v("wt"), v("bt"), v("wg"), v("bg")).unwrap();
        weighted_sum(g, y, 80)
    });
    assert_below("highway_layer", e, 1e-5);
}

fn tiny_batch(vocab: u32, max_len: usize, lens: &[usize], seed: u64) -> Vec<TokenSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lens.iter()
        .map(|&n| {
            let mut ids = vec![CLS];
            ids.extend((0..n).map(|_| rng.random_range(4..vocab)));
            ids.push(SEP);
            let active = ids.len();
            ids.resize(max_len, PAD);
            let mut mask = vec![1u8; active];
            mask.resize(max_len, 0);
            TokenSequence {
                ids,
                attention_mask: mask,
            }
        })
        .collect()
}

fn model_rel_error(model: &Model, batch: &[TokenSequence], labels: &[usize]) -> f64 {
    max_rel_error(&model.params, |g, b| {
        let logits = model.forward(g, b, batch, ForwardMode::Eval).unwrap();
        g.cross_entropy(logits, labels).unwrap()
    })
}

#[test]
fn full_transformer_gradient() {
    let config = ModelConfig::Transformer(TransformerConfig {
        vocab_size: 12,
        max_seq_len: 8,
        model_dim: 8,
        num_heads: 2,
        num_layers: 2,
        ffn_dim: 16,
        dropout_rate: 0.1,
        num_classes: 2,
    });
    let mut model = Model::init(config, 3).unwrap();
    // move the norms off their identity start so every path carries signal
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let names: Vec<String> = model.params.iter().map(|(n, _)| n.to_string()).collect();
    for n in names {
        for v in model.params.get_mut(&n).unwrap().data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    assert!(model.params.scalar_count() <= 5_000);
    let batch = tiny_batch(12, 8, &[3, 6, 1], 4);
    let err = model_rel_error(&model, &batch, &[1, 0, 1]);
    assert_below("transformer", err, 1e-4);
}

#[test]
fn full_cnn_highway_gradient() {
    let config = ModelConfig::CnnHighway(CnnHighwayConfig {
        vocab_size: 12,
        max_seq_len: 10,
        embed_dim: 4,
        filter_widths: vec![2, 3],
        filters_per_width: 3,
        num_highway_layers: 2,
        num_classes: 2,
    });
    let mut model = Model::init(config, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let names: Vec<String> = model.params.iter().map(|(n, _)| n.to_string()).collect();
    for n in names {
        for v in model.params.get_mut(&n).unwrap().data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    assert!(model.params.scalar_count() <= 5_000);
    let batch = tiny_batch(12, 10, &[4, 7, 2], 6);
    let err = model_rel_error(&model, &batch, &[0, 1, 1]);
    assert_below("cnn_highway", err, 1e-4);
}
