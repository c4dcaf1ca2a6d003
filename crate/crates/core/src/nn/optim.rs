use super::{GradSet, ParamSet};
use crate::error::Result;

/// First/second moment estimates of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: GradSet,
    pub v: GradSet,
    pub t: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn init(&self, params: &ParamSet) -> AdamState {
        AdamState { m: GradSet::zeros_like(params), v: GradSet::zeros_like(params), t: 0 }
    }

    /// One bias-corrected Adam update.
    pub fn step(&self, params: &ParamSet, grads: &GradSet, state: &AdamState) -> Result<(ParamSet, AdamState)> {
        params.check_grads(grads)?;
        params.check_grads(&state.m)?;
        let t = state.t + 1;
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        let mut m = state.m.clone();
        let mut v = state.v.clone();
        m.scale(self.beta1);
        m.add_scaled(grads, 1.0 - self.beta1)?;
        let squared = GradSet::from_map(grads.iter().map(|(k, g)| (k.clone(), g.map(|x| x * x))).collect());
        v.scale(self.beta2);
        v.add_scaled(&squared, 1.0 - self.beta2)?;

        let mut next = params.clone();
        for ((_, p), ((_, m_t), (_, v_t))) in next.iter_mut().zip(m.iter().zip(v.iter())) {
            for ((x, &mm), &vv) in p.data_mut().iter_mut().zip(m_t.data()).zip(v_t.data()) {
                let m_hat = mm / bc1;
                let v_hat = vv / bc2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok((next, AdamState { m, v, t }))
    }
}

/// Functional form of [`Adam::step`].
pub fn adam_step(params: &ParamSet, grads: &GradSet, state: &AdamState, lr: f64) -> Result<(ParamSet, AdamState)> {
    Adam::new(lr).step(params, grads, state)
}
