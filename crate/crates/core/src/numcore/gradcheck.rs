//! Central finite-difference gradient checks against the tape.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{BoundParams, Graph, ParamStore, Tensor, Var};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest per-tensor relative error `‖a−n‖ / max(‖a‖, ‖n‖)`.
    pub worst: f64,
    pub worst_param: String,
    pub params_checked: usize,
}

/// Compares backprop gradients of the scalar `loss` with central
/// differences of step `h`, one tensor at a time. Tensors whose gradient
/// norm is below `zero_tol` (some vanish identically, such as an attention
/// key bias) are compared absolutely: they pass with error 0 when the
/// difference is also below `zero_tol`.
pub fn check_gradients<F>(store: &ParamStore, h: f64, zero_tol: f64, loss: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &BoundParams) -> Result<Var>,
{
    let mut g = Graph::new();
    let bound = store.bind(&mut g);
    let l = loss(&mut g, &bound)?;
    if g.value(l).len() != 1 {
        return Err(CoreError::InvalidConfig(
            "gradient check needs a scalar loss".into(),
        ));
    }
    let mut grads = g.backward(l)?;
    let analytic = bound.collect(&mut grads);

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let b = s.bind_frozen(&mut g);
        let l = loss(&mut g, &b)?;
        Ok(g.value(l).data()[0])
    };

    let mut out = GradCheck {
        worst: 0.0,
        worst_param: String::new(),
        params_checked: 0,
    };
    let names: Vec<String> = store.iter().map(|(n, _)| n.to_string()).collect();
    let mut probe = store.clone();
    for (i, name) in names.iter().enumerate() {
        let shape = store.get(name).expect("listed name").shape().to_vec();
        let zeros = Tensor::zeros(&shape);
        // a parameter the loss never touches has no recorded gradient
        let a = analytic.get(i).unwrap_or(&zeros);
        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        for j in 0..a.len() {
            let orig = probe.get(name).expect("listed name").data()[j];
            probe.get_mut(name).expect("listed name").data_mut()[j] = orig + h;
            let up = eval(&probe)?;
            probe.get_mut(name).expect("listed name").data_mut()[j] = orig - h;
            let down = eval(&probe)?;
            probe.get_mut(name).expect("listed name").data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = a.data()[j];
            diff2 += (analytic - numeric) * (analytic - numeric);
            a2 += analytic * analytic;
            n2 += numeric * numeric;
        }
        let diff = libm::sqrt(diff2);
        let scale = libm::sqrt(a2).max(libm::sqrt(n2));
        let rel = if scale < zero_tol {
            if diff < zero_tol {
                0.0
            } else {
                diff / zero_tol
            }
        } else {
            diff / scale
        };
        if !rel.is_finite() {
            return Err(CoreError::NonFinite {
                op: "gradient check",
            });
        }
        if rel > out.worst || out.worst_param.is_empty() {
            out.worst = out.worst.max(rel);
            out.worst_param.clone_from(name);
        }
        out.params_checked += a.len();
    }
    Ok(out)
}
