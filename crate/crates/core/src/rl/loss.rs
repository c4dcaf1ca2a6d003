use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{compute_gae_scaled, normalize, Trajectory, Transition};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{ParamVars, PolicyNet};

/// Coefficients shared by the policy-gradient task loss and PPO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    /// Multiplies rewards before advantage estimation; the value head
    /// predicts returns in these units.
    pub reward_scale: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { gamma: 0.99, gae_lambda: 0.95, value_coeff: 0.5, entropy_coeff: 0.01, reward_scale: 1e-3 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return Err(Error::config("gamma and gae_lambda must lie in [0, 1]"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("reward_scale must be positive"));
        }
        if !(self.value_coeff >= 0.0 && self.entropy_coeff >= 0.0) {
            return Err(Error::config("loss coefficients must be non-negative"));
        }
        Ok(())
    }
}

/// Per-step policy quantities recomputed on a tape. All `T × 1`.
#[derive(Debug, Clone, Copy)]
pub struct PolicyEval<'t> {
    pub log_probs: Var<'t>,
    pub values: Var<'t>,
    pub entropy: Var<'t>,
}

/// Re-evaluates the policy on `steps`. Each range in `segments` is run from
/// a fresh recurrent state; the outputs are concatenated in segment order.
pub fn evaluate_segments<'t>(
    net: &dyn PolicyNet,
    params: &ParamVars<'t>,
    tape: &'t Tape,
    steps: &[&Transition],
    segments: &[Range<usize>],
) -> Result<PolicyEval<'t>> {
    let spec = net.spec();
    let (cells, levels) = (spec.n_cells, spec.n_levels);
    let mut logits = Vec::with_capacity(segments.len());
    let mut values = Vec::with_capacity(segments.len());
    let mut order = Vec::new();
    for seg in segments {
        if seg.is_empty() {
            continue;
        }
        let rows = &steps[seg.clone()];
        let obs: Vec<f64> = rows.iter().flat_map(|s| s.obs.iter().copied()).collect();
        let obs = tape.constant(Tensor::new(rows.len(), spec.obs_dim, obs)?);
        let out = net.forward_sequence(params, obs)?;
        logits.push(out.logits);
        values.push(out.values);
        order.extend(rows.iter().copied());
    }
    if order.is_empty() {
        return Err(Error::contract("cannot evaluate an empty batch"));
    }
    let t = order.len();
    let log_p = Var::concat_rows(&logits)?.reshape(t * cells, levels)?.log_softmax_rows();

    let mut onehot = Tensor::zeros(t * cells, levels);
    for (i, step) in order.iter().enumerate() {
        if step.action.len() != cells {
            return Err(Error::shape(format!("action has {} cells, policy {}", step.action.len(), cells)));
        }
        for (c, &k) in step.action.iter().enumerate() {
            if k >= levels {
                return Err(Error::contract(format!("action level {k} out of range")));
            }
            onehot.set(i * cells + c, k, 1.0);
        }
    }
    let log_probs = (log_p * tape.constant(onehot)).sum_cols().reshape(t, cells)?.sum_cols();
    let entropy = -(log_p.exp() * log_p).sum_cols().reshape(t, cells)?.sum_cols();
    Ok(PolicyEval { log_probs, values: Var::concat_rows(&values)?, entropy })
}

/// Flattened batch of trajectories with per-step advantage targets.
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub steps: Vec<&'a Transition>,
    /// Episode ranges into `steps`.
    pub episodes: Vec<Range<usize>>,
    /// Normalized over the whole batch.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl<'a> Batch<'a> {
    pub fn new(trajs: &'a [Trajectory], cfg: &LossConfig) -> Batch<'a> {
        let mut batch = Batch { steps: Vec::new(), episodes: Vec::new(), advantages: Vec::new(), returns: Vec::new() };
        for traj in trajs {
            let offset = batch.steps.len();
            let est = compute_gae_scaled(traj, cfg.gamma, cfg.gae_lambda, cfg.reward_scale);
            batch.advantages.extend(est.advantages);
            batch.returns.extend(est.returns);
            batch.episodes.extend(traj.episodes().into_iter().map(|r| r.start + offset..r.end + offset));
            batch.steps.extend(traj.steps.iter());
        }
        batch.advantages = normalize(&batch.advantages);
        batch
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossTerms<'t> {
    pub total: Var<'t>,
    pub policy: Var<'t>,
    pub value: Var<'t>,
    pub entropy: Var<'t>,
}

/// `−mean(log π · Â) + c_v·mean((V − R)²) − c_H·mean(H)` with the given
/// advantages used as-is.
pub fn pg_loss<'t>(eval: &PolicyEval<'t>, advantages: &[f64], returns: &[f64], cfg: &LossConfig) -> Result<LossTerms<'t>> {
    let t = eval.log_probs.value().rows();
    if advantages.len() != t || returns.len() != t {
        return Err(Error::shape(format!("{t} steps, {} advantages, {} returns", advantages.len(), returns.len())));
    }
    let tape = eval.log_probs.tape();
    let adv = tape.constant(Tensor::column(advantages.to_vec()));
    let ret = tape.constant(Tensor::column(returns.to_vec()));
    let policy = -(eval.log_probs * adv).mean_all();
    let value = (eval.values - ret).square().mean_all();
    let entropy = eval.entropy.mean_all();
    let total = policy + value.scale(cfg.value_coeff) - entropy.scale(cfg.entropy_coeff);
    Ok(LossTerms { total, policy, value, entropy })
}

/// [`pg_loss`] over every step of `trajs` with batch-normalized GAE
/// advantages, differentiable with respect to `params`.
pub fn task_loss<'t>(
    net: &dyn PolicyNet,
    params: &ParamVars<'t>,
    tape: &'t Tape,
    trajs: &[Trajectory],
    cfg: &LossConfig,
) -> Result<LossTerms<'t>> {
    let batch = Batch::new(trajs, cfg);
    let eval = evaluate_segments(net, params, tape, &batch.steps, &batch.episodes)?;
    pg_loss(&eval, &batch.advantages, &batch.returns, cfg)
}
