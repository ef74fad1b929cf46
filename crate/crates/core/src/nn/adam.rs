use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidConfig(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn for_params(params: &[&Tensor]) -> Self {
        Self {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update over every parameter tensor.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<(), NnError> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(NnError::ShapeMismatch(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() || p.shape() != state.v[i].shape() {
            return Err(NnError::ShapeMismatch(format!("adam: parameter {i} shape mismatch")));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for (((w, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}
