use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub inner_lr: f64,
    pub meta_lr: f64,
    pub meta_batch_size: usize,
    pub inner_steps: usize,
    pub support_horizon: usize,
    pub query_horizon: usize,
    /// Differentiate through the inner update; otherwise its Jacobian is
    /// taken as the identity.
    pub second_order: bool,
    pub n_meta_iters: usize,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            inner_lr: 0.01,
            meta_lr: 1e-3,
            meta_batch_size: 4,
            inner_steps: 1,
            support_horizon: 50,
            query_horizon: 50,
            second_order: true,
            n_meta_iters: 37,
        }
    }
}

impl MetaConfig {
    /// `inner_lr = 0` is allowed (no adaptation).
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_lr >= 0.0 && self.inner_lr.is_finite()) {
            return Err(Error::config("inner_lr must be finite and non-negative"));
        }
        if !(self.meta_lr > 0.0 && self.meta_lr.is_finite()) {
            return Err(Error::config("meta_lr must be positive"));
        }
        if self.meta_batch_size == 0 || self.inner_steps == 0 {
            return Err(Error::config("meta_batch_size and inner_steps must be at least 1"));
        }
        if self.support_horizon == 0 || self.query_horizon == 0 {
            return Err(Error::config("support and query horizons must be at least 1"));
        }
        Ok(())
    }

    /// Environment episodes consumed by one meta-iteration, counting every
    /// support and query rollout.
    pub fn episodes_per_iteration(&self, episode_len: usize) -> usize {
        let episodes = |h: usize| h.div_ceil(episode_len.max(1));
        self.meta_batch_size * (self.inner_steps * episodes(self.support_horizon) + episodes(self.query_horizon))
    }
}
