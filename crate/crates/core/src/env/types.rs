use serde::{Deserialize, Serialize};

use super::NetworkConfig;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Per-link grid of transmit powers (`n_bs × n_bands`, watts).
pub type PowerGrid = Tensor;

/// One sampled task: network geometry, path-loss scenario and `I_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub seed: u64,
    pub bs_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    /// `n_bs × n_bands`, watts.
    pub initial_interference_w: Vec<Vec<f64>>,
    pub eta_task: f64,
    pub shadow_sigma_task_db: f64,
}

impl TaskSpec {
    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.bs_positions.len() != cfg.n_bs || self.ue_positions.len() != cfg.n_ue {
            return Err(Error::config("task geometry does not match n_bs / n_ue"));
        }
        let finite = |p: &[f64; 2]| p[0].is_finite() && p[1].is_finite();
        if !self.bs_positions.iter().chain(&self.ue_positions).all(finite) {
            return Err(Error::config("task positions must be finite"));
        }
        if self.initial_interference_w.len() != cfg.n_bs
            || self.initial_interference_w.iter().any(|r| r.len() != cfg.n_bands)
        {
            return Err(Error::config("initial interference must be n_bs x n_bands"));
        }
        if self.initial_interference_w.iter().flatten().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("initial interference must be nonnegative"));
        }
        if !self.eta_task.is_finite() || !(self.shadow_sigma_task_db >= 0.0) {
            return Err(Error::config("task path-loss parameters invalid"));
        }
        Ok(())
    }

    pub fn initial_interference(&self) -> Tensor {
        let rows = self.initial_interference_w.len();
        let cols = self.initial_interference_w.first().map_or(0, Vec::len);
        Tensor::new(rows, cols, self.initial_interference_w.concat()).expect("validated task")
    }
}

/// Discrete power-level choice for every (BS, band) link.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AllocationAction {
    pub n_bs: usize,
    pub n_bands: usize,
    /// Row-major `n_bs × n_bands` level indices.
    pub levels: Vec<usize>,
}

impl AllocationAction {
    pub fn new(n_bs: usize, n_bands: usize, levels: Vec<usize>) -> Result<Self> {
        if levels.len() != n_bs * n_bands {
            return Err(Error::shape(format!(
                "action needs {} levels, got {}",
                n_bs * n_bands,
                levels.len()
            )));
        }
        Ok(AllocationAction { n_bs, n_bands, levels })
    }

    pub fn uniform(n_bs: usize, n_bands: usize, level: usize) -> Self {
        AllocationAction { n_bs, n_bands, levels: vec![level; n_bs * n_bands] }
    }

    pub fn level(&self, bs: usize, band: usize) -> usize {
        self.levels[bs * self.n_bands + band]
    }
}

/// `s_t = (C_t, I_t, Q_t, A_{t-1}, P_{t-1}, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// `n_ue × n_bs` channel gains, dB.
    pub channel_db: Tensor,
    /// `n_bs × n_bands`, watts.
    pub interference_w: Tensor,
    /// `n_ue × 2`: latency (ms), served throughput (bps).
    pub qos: Tensor,
    pub prev_action: AllocationAction,
    pub prev_power_w: PowerGrid,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub throughput_bps: f64,
    pub fairness: f64,
    pub cost: f64,
    pub penalty: f64,
    pub sinr_violations: usize,
    pub latency_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub reward_parts: RewardBreakdown,
    pub executed_power_w: PowerGrid,
    pub sinr_linear: Tensor,
    pub done: bool,
}
