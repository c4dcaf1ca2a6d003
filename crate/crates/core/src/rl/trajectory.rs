use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::env::{flatten_observation, Env, RewardBreakdown};
use crate::error::{Error, Result};
use crate::nn::{sample_action, Carry, ParamSet, PolicyNet};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Chosen level per link, row-major.
    pub action: Vec<usize>,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    pub parts: RewardBreakdown,
}

/// Rollout of one policy in one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_seed: u64,
    pub steps: Vec<Transition>,
    /// `V(s_T)` after the last step; zero when the rollout ends an episode.
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step ranges of each episode (the last may be incomplete).
    pub fn episodes(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, s) in self.steps.iter().enumerate() {
            if s.done {
                out.push(start..i + 1);
                start = i + 1;
            }
        }
        if start < self.steps.len() {
            out.push(start..self.steps.len());
        }
        out
    }

    pub fn n_complete_episodes(&self) -> usize {
        self.steps.iter().filter(|s| s.done).count()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Rolls `params` in `env` for `horizon` steps, resetting the environment
/// (and any recurrent state) at episode boundaries. Environment noise and
/// action sampling both draw from `rng`.
pub fn collect_trajectory(
    net: &dyn PolicyNet,
    params: &ParamSet,
    env: &Env,
    horizon: usize,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::contract("trajectory horizon must be at least 1"));
    }
    let cfg = env.config();
    let mut state = env.reset(rng);
    let mut carry = Carry::default();
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let obs = flatten_observation(&state, cfg);
        let out = net.step(params, &obs, &mut carry)?;
        let (action, log_prob) = sample_action(&out.logits, cfg.n_bs, cfg.n_bands, rng)?;
        let outcome = env.step(&state, &action, rng)?;
        if !outcome.reward.is_finite() {
            return Err(Error::Divergence("non-finite reward".into()));
        }
        steps.push(Transition {
            obs,
            action: action.levels,
            log_prob,
            reward: outcome.reward,
            value: out.value,
            done: outcome.done,
            parts: outcome.reward_parts,
        });
        if outcome.done {
            state = env.reset(rng);
            carry = Carry::default();
        } else {
            state = outcome.next_state;
        }
    }
    let bootstrap_value = if steps.last().is_some_and(|s| s.done) {
        0.0
    } else {
        net.step(params, &flatten_observation(&state, cfg), &mut carry)?.value
    };
    Ok(Trajectory { task_seed: env.task().seed, steps, bootstrap_value })
}
