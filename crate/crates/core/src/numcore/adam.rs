use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::{ParamGrads, ParamStore};
use super::tensor::Tensor;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    step_count: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        Self {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One Adam update. Gradients are zeroed afterwards.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &mut ParamGrads,
    state: &mut AdamState,
) -> Result<()> {
    if grads.len() != params.len() || state.first_moment.len() != params.len() {
        return Err(CoreError::InvalidConfig(
            "optimizer state does not match the parameter set".to_string(),
        ));
    }
    if let Some((name, _)) = params
        .iter()
        .zip(grads.iter())
        .find(|(_, g)| g.is_none())
        .map(|(p, g)| (p.0, g))
    {
        return Err(CoreError::MissingGradient(name.to_string()));
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as f64;
    let bias1 = 1.0 - libm::pow(beta1, t);
    let bias2 = 1.0 - libm::pow(beta2, t);

    for (i, param) in params.tensors_mut().enumerate() {
        let g = grads.get(i).expect("checked above").data();
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        for (((p, &gi), mi), vi) in param
            .data_mut()
            .iter_mut()
            .zip(g)
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *p -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
        }
    }
    grads.zero();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Graph;
    use alloc::vec;

    fn setup(values: &[f64], grad_scale: f64) -> (ParamStore, ParamGrads) {
        let mut params = ParamStore::new();
        params
            .insert(
                "w",
                Tensor::new(vec![1, values.len()], values.to_vec()).unwrap(),
            )
            .unwrap();
        // loss = grad_scale · Σ w_j
        let mut g = Graph::new();
        let bound = params.bind(&mut g);
        let w = bound.var("w").unwrap();
        let c =
            g.constant(Tensor::new(vec![values.len(), 1], vec![grad_scale; values.len()]).unwrap());
        let s = g.matmul(w, c).unwrap();
        let mut grads = g.backward(s).unwrap();
        (params.clone(), bound.collect(&mut grads))
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut params, mut grads) = setup(&[0.5, -0.25], 0.0);
        let before = params.clone();
        let mut state = AdamState::new(&params, AdamConfig::default());
        adam_step(&mut params, &mut grads, &mut state).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let (mut params, mut grads) = setup(&[0.5, -0.25], 3.0);
        let before = params.clone();
        let mut state = AdamState::new(&params, AdamConfig::default());
        adam_step(&mut params, &mut grads, &mut state).unwrap();
        let lr = state.config.learning_rate;
        for (a, b) in params
            .get("w")
            .unwrap()
            .data()
            .iter()
            .zip(before.get("w").unwrap().data())
        {
            assert!(((a - b) + lr).abs() < 1e-6 * lr);
        }
        // grads zeroed
        assert!(grads.get(0).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn missing_gradient_is_reported() {
        let mut params = ParamStore::new();
        params.insert("used", Tensor::zeros(&[1, 1])).unwrap();
        params.insert("unused", Tensor::zeros(&[1, 1])).unwrap();
        let mut g = Graph::new();
        let bound = params.bind(&mut g);
        let u = bound.var("used").unwrap();
        let loss = g.scale(u, 2.0).unwrap();
        let mut grads = g.backward(loss).unwrap();
        let mut pg = bound.collect(&mut grads);
        let mut state = AdamState::new(&params, AdamConfig::default());
        assert_eq!(
            adam_step(&mut params, &mut pg, &mut state),
            Err(CoreError::MissingGradient("unused".into()))
        );
    }
}
