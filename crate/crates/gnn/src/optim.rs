use serde::{Deserialize, Serialize};

use crate::error::GnnError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDecay {
    /// `p -= lr * wd * p`, applied outside the adaptive moments.
    #[default]
    Decoupled,
    /// `wd * p` added to the gradient before the moments.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay_mode: WeightDecay,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            decay_mode: WeightDecay::Decoupled,
        }
    }
}

/// First and second moments per parameter, plus the step count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<(), GnnError> {
    if params.len() != grads.len() {
        return Err(GnnError::Argument(format!(
            "{} parameters, {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if let Some(i) = (0..params.len()).find(|&i| params[i].shape() != grads[i].shape()) {
        return Err(GnnError::shape(
            "adam_step",
            format!(
                "param {i}: {:?} vs grad {:?}",
                params[i].shape(),
                grads[i].shape()
            ),
        ));
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
        state.v = state.m.clone();
    } else if state.m.len() != params.len()
        || state
            .m
            .iter()
            .zip(params.iter())
            .any(|(m, p)| m.len() != p.len())
    {
        return Err(GnnError::State(
            "optimizer state does not match parameters".into(),
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            let grad = match cfg.decay_mode {
                WeightDecay::L2 => gv + cfg.weight_decay * *pv,
                WeightDecay::Decoupled => gv,
            };
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * grad;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * grad * grad;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            if cfg.decay_mode == WeightDecay::Decoupled {
                *pv -= cfg.lr * cfg.weight_decay * *pv;
            }
            *pv -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::from_rows(&[vec![1.0, -2.0]]).unwrap();
        let before = p.clone();
        let mut state = AdamState::new();
        let cfg = AdamConfig::new(0.1, 0.0);
        adam_step(&mut [&mut p], &[Tensor::zeros(1, 2)], &mut state, &cfg).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_closed_form() {
        // after bias correction m_hat = g and v_hat = g^2
        let mut p = Tensor::from_rows(&[vec![0.5, 0.5, 0.5]]).unwrap();
        let g = Tensor::from_rows(&[vec![2.0, -0.25, 1e-3]]).unwrap();
        let cfg = AdamConfig::new(0.01, 0.0);
        adam_step(
            &mut [&mut p],
            std::slice::from_ref(&g),
            &mut AdamState::new(),
            &cfg,
        )
        .unwrap();
        for (pv, gv) in p.data().iter().zip(g.data()) {
            let expected = 0.5 - 0.01 * gv / (gv.abs() + 1e-8);
            assert!((pv - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn decoupled_decay_shrinks_without_gradient() {
        let mut p = Tensor::scalar(1.0);
        let cfg = AdamConfig::new(0.1, 0.5);
        adam_step(
            &mut [&mut p],
            &[Tensor::scalar(0.0)],
            &mut AdamState::new(),
            &cfg,
        )
        .unwrap();
        assert!((p.data()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut a = Tensor::scalar(1.0);
        let mut state = AdamState::new();
        let cfg = AdamConfig::new(0.1, 0.0);
        adam_step(&mut [&mut a], &[Tensor::scalar(1.0)], &mut state, &cfg).unwrap();
        let mut b = Tensor::zeros(1, 2);
        assert!(adam_step(&mut [&mut b], &[Tensor::zeros(1, 2)], &mut state, &cfg).is_err());
    }
}
