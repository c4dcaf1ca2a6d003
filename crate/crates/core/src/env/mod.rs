//! Wireless spectrum-allocation CMDP.
//!
//! One [`Env`] binds a [`NetworkConfig`] to a sampled [`TaskSpec`]. States
//! are plain values; [`Env::step`] is a pure function of the state, the
//! action and the generator it is handed.

mod channel;
mod config;
mod link;
mod reward;
mod task;
mod types;

pub use channel::{
    db_to_linear, distance, fading_step, init_channel, mean_channel_db, path_loss_db, update_interference,
    MIN_DISTANCE_M,
};
pub use config::{EnvConfig, NetworkConfig, TaskDistribution};
pub(crate) use config::{from_table, known_keys, reject_unknown};
pub use link::{
    action_to_power, apply_safety_filter, associate_users, compute_sinr_grid, served_throughput, throughput_bps,
    update_qos, Association,
};
pub use reward::{compute_reward, fairness_index, step_cost, step_penalty};
pub use task::{sample_task, task_from_seed};
pub use types::{AllocationAction, EnvState, PowerGrid, RewardBreakdown, StepOutcome, TaskSpec};

use rand::Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Floor inside the interference log so empty bands stay finite.
const INTERFERENCE_FLOOR_W: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct Env {
    cfg: NetworkConfig,
    task: TaskSpec,
    /// Path-loss mean `L` (UE × BS, dB); fading perturbs the channel around it.
    mean_channel_db: Tensor,
}

impl Env {
    pub fn new(cfg: NetworkConfig, task: TaskSpec) -> Result<Self> {
        cfg.validate()?;
        task.validate(&cfg)?;
        let mean_channel_db = mean_channel_db(&task, &cfg);
        Ok(Env { cfg, task, mean_channel_db })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let cfg = &self.cfg;
        EnvState {
            channel_db: init_channel(&self.task, cfg, rng),
            interference_w: self.task.initial_interference(),
            qos: Tensor::zeros(cfg.n_ue, 2),
            prev_action: AllocationAction::uniform(cfg.n_bs, cfg.n_bands, 0),
            prev_power_w: Tensor::zeros(cfg.n_bs, cfg.n_bands),
            t: 0,
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &EnvState, action: &AllocationAction, rng: &mut R) -> Result<StepOutcome> {
        let cfg = &self.cfg;
        if state.t >= cfg.episode_len {
            return Err(Error::contract(format!("step at t = {} after episode end", state.t)));
        }
        let requested = action_to_power(action, cfg)?;
        let p_safe = apply_safety_filter(&requested, &state.interference_w, cfg.i_max_w);
        let assoc = associate_users(&state.channel_db);
        let sinr = compute_sinr_grid(&p_safe, &state.channel_db, &assoc, cfg);

        let (throughput, per_link) = throughput_bps(&sinr, &p_safe, cfg);
        let fairness = fairness_index(&per_link);
        let cost = step_cost(&p_safe, &state.prev_power_w, cfg);
        // the latency penalty is judged on the post-step queue
        let qos = update_qos(&state.qos, &sinr, &assoc, cfg);
        let (penalty, sinr_violations, latency_violations) = step_penalty(&sinr, &p_safe, &qos, cfg);
        let parts = RewardBreakdown { throughput_bps: throughput, fairness, cost, penalty, sinr_violations, latency_violations };
        let reward = compute_reward(&parts, cfg);

        let interference = update_interference(&p_safe, &self.task.bs_positions, cfg, self.task.eta_task);
        let deviation = state.channel_db.zip_map(&self.mean_channel_db, |c, l| c - l);
        let faded = fading_step(&deviation, cfg.fading_kappa, cfg.fading_sigma_db, rng);
        let channel = faded.zip_map(&self.mean_channel_db, |x, l| x + l);

        // record the executed (filtered) allocation as the previous action
        let executed_levels = action
            .levels
            .iter()
            .zip(p_safe.data())
            .map(|(&level, &p)| if p > 0.0 { level } else { 0 })
            .collect();
        let t = state.t + 1;
        let next_state = EnvState {
            channel_db: channel,
            interference_w: interference,
            qos,
            prev_action: AllocationAction::new(cfg.n_bs, cfg.n_bands, executed_levels)?,
            prev_power_w: p_safe.clone(),
            t,
        };
        Ok(StepOutcome {
            next_state,
            reward,
            reward_parts: parts,
            executed_power_w: p_safe,
            sinr_linear: sinr,
            done: t == cfg.episode_len,
        })
    }
}

pub fn observation_len(cfg: &NetworkConfig) -> usize {
    cfg.n_ue * cfg.n_bs + cfg.n_bs * cfg.n_bands * 2 + cfg.n_ue * 2 + 1
}

/// Fixed-length policy input: channel/100, scaled log-interference,
/// normalized QoS, previous levels / (K−1), t / episode_len.
pub fn flatten_observation(state: &EnvState, cfg: &NetworkConfig) -> Vec<f64> {
    let mut obs = Vec::with_capacity(observation_len(cfg));
    obs.extend(state.channel_db.data().iter().map(|c| c / 100.0));
    obs.extend(
        state.interference_w.data().iter().map(|&i| ((i + INTERFERENCE_FLOOR_W).log10() + 15.0) / 15.0),
    );
    for u in 0..state.qos.rows() {
        obs.push(state.qos.get(u, 0) / cfg.latency_max_ms.max(f64::MIN_POSITIVE));
        obs.push(state.qos.get(u, 1) / (cfg.bandwidth_hz * cfg.n_levels as f64));
    }
    let top = (cfg.n_levels - 1) as f64;
    obs.extend(state.prev_action.levels.iter().map(|&l| l as f64 / top));
    obs.push(state.t as f64 / cfg.episode_len as f64);
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn env(seed: u64) -> Env {
        let cfg = NetworkConfig::default();
        let task = task_from_seed(&TaskDistribution::default(), &cfg, seed);
        Env::new(cfg, task).unwrap()
    }

    #[test]
    fn reset_state() {
        let e = env(1);
        let s = e.reset(&mut seeded(2));
        assert_eq!(s.t, 0);
        assert_eq!(s.interference_w, e.task().initial_interference());
        assert_eq!(s, e.reset(&mut seeded(2)));
        assert!(s.qos.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_action_yields_only_fairness_and_penalty() {
        let e = env(3);
        let s = e.reset(&mut seeded(0));
        let out = e.step(&s, &AllocationAction::uniform(3, 5, 0), &mut seeded(1)).unwrap();
        assert!(out.executed_power_w.data().iter().all(|&p| p == 0.0));
        assert_eq!(out.reward_parts.throughput_bps, 0.0);
        assert_eq!(out.reward_parts.cost, 0.0);
        let w = e.config().weights;
        let expect = w[1] * out.reward_parts.fairness - w[3] * out.reward_parts.penalty;
        assert_eq!(out.reward, expect);
    }

    #[test]
    fn done_exactly_at_episode_end() {
        let e = env(4);
        let mut rng = seeded(0);
        let mut s = e.reset(&mut rng);
        let a = AllocationAction::uniform(3, 5, 2);
        for t in 1..=e.config().episode_len {
            let out = e.step(&s, &a, &mut rng).unwrap();
            assert_eq!(out.done, t == e.config().episode_len);
            s = out.next_state;
        }
        assert!(matches!(e.step(&s, &a, &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn observation_layout() {
        let cfg = NetworkConfig::default();
        assert_eq!(observation_len(&cfg), 81);
        let e = env(5);
        let s = e.reset(&mut seeded(0));
        let obs = flatten_observation(&s, &cfg);
        assert_eq!(obs.len(), 81);
        assert_eq!(*obs.last().unwrap(), 0.0);
        assert!(obs.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn invalid_config_is_a_config_error() {
        let cfg = NetworkConfig { n_levels: 1, ..NetworkConfig::default() };
        let task = task_from_seed(&TaskDistribution::default(), &NetworkConfig::default(), 0);
        assert!(matches!(Env::new(cfg, task), Err(Error::Config(_))));
    }
}
