//! Adam parameter updates with bias correction.

use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

/// First/second moment buffers mirroring one flat list of parameter
/// tensors, plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
    t: u64,
}

impl<S: Scalar> AdamState<S> {
    /// Moment buffers shaped after `params`.
    pub fn new(config: AdamConfig, params: &[&Tensor<S>]) -> Self {
        AdamState {
            config,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update over a flat parameter list. `params`
/// and `grads` must line up with the state's buffers. The step counter
/// advances exactly once per call.
pub fn adam_step<S: Scalar>(
    params: &mut [&mut Tensor<S>],
    grads: &[&Tensor<S>],
    state: &mut AdamState<S>,
) -> Result<(), NeuralError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(NeuralError::ShapeMismatch(format!(
            "{} params, {} grads, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), (m, v)) in params
        .iter()
        .zip(grads)
        .zip(state.m.iter().zip(&state.v))
    {
        if p.shape() != g.shape() || p.shape() != m.shape() || p.shape() != v.shape() {
            return Err(NeuralError::ShapeMismatch(format!(
                "param {:?} vs grad {:?}",
                p.shape(),
                g.shape()
            )));
        }
        if !g.all_finite() {
            return Err(NeuralError::NonFinite("gradient".into()));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let cfg = state.config;
    let (b1, b2) = (S::from_f64(cfg.beta1), S::from_f64(cfg.beta2));
    let lr = S::from_f64(cfg.lr);
    let eps = S::from_f64(cfg.epsilon);
    let corr1 = S::one() - b1.powi(t);
    let corr2 = S::one() - b2.powi(t);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pd = p.data_mut();
        let gd = g.data();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..pd.len() {
            md[i] = b1 * md[i] + (S::one() - b1) * gd[i];
            vd[i] = b2 * vd[i] + (S::one() - b2) * gd[i] * gd[i];
            let m_hat = md[i] / corr1;
            let v_hat = vd[i] / corr2;
            pd[i] = pd[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
