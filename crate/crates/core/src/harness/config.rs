use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{from_table, known_keys, reject_unknown, EnvConfig, NetworkConfig, TaskDistribution};
use crate::error::{Error, Result};
use crate::meta::MetaConfig;
use crate::nn::{ArchKind, ArchSpec};
use crate::rl::{LossConfig, PpoConfig};

/// Flat run configuration. Environment keys may appear inline or come from
/// a separate file named by `env_config`, not both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: String,
    pub n_episodes: usize,
    /// Episodes between evaluations on held-out tasks.
    pub eval_interval: usize,
    pub eval_tasks: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    /// Write the per-step reward breakdown of every evaluation rollout.
    pub dump_trajectories: bool,

    pub hidden_size: usize,
    pub n_heads: usize,
    pub layer_sizes: Vec<usize>,

    pub gamma: f64,
    pub gae_lambda: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    pub reward_scale: f64,

    pub inner_lr: f64,
    pub meta_lr: f64,
    pub meta_batch_size: usize,
    pub inner_steps: usize,
    pub support_horizon: usize,
    pub query_horizon: usize,
    pub second_order: bool,

    pub clip_eps: f64,
    pub ppo_epochs: usize,
    pub ppo_minibatch: usize,
    pub ppo_lr: f64,
    /// Episodes collected per PPO update.
    pub ppo_batch_episodes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let loss = LossConfig::default();
        let meta = MetaConfig::default();
        let ppo = PpoConfig::default();
        RunConfig {
            algorithm: "maml_mlp".into(),
            n_episodes: 300,
            eval_interval: 10,
            eval_tasks: 5,
            eval_episodes: 1,
            seed: 0,
            dump_trajectories: false,
            hidden_size: 64,
            n_heads: 1,
            layer_sizes: vec![64, 64],
            gamma: loss.gamma,
            gae_lambda: loss.gae_lambda,
            value_coeff: loss.value_coeff,
            entropy_coeff: loss.entropy_coeff,
            reward_scale: loss.reward_scale,
            inner_lr: meta.inner_lr,
            meta_lr: meta.meta_lr,
            meta_batch_size: meta.meta_batch_size,
            inner_steps: meta.inner_steps,
            support_horizon: meta.support_horizon,
            query_horizon: meta.query_horizon,
            second_order: meta.second_order,
            clip_eps: ppo.clip_eps,
            ppo_epochs: ppo.epochs,
            ppo_minibatch: ppo.minibatch,
            ppo_lr: ppo.learning_rate,
            ppo_batch_episodes: 4,
        }
    }
}

const ENV_PATH_KEY: &str = "env_config";

/// A parsed run file: run settings plus the environment they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSetup {
    pub run: RunConfig,
    pub env: EnvConfig,
}

impl RunSetup {
    /// `base` resolves a relative `env_config` path.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<RunSetup> {
        let table: toml::Table = text.parse().map_err(|e| Error::config(format!("{e}")))?;
        let run_keys: BTreeSet<String> = known_keys::<RunConfig>().into_iter().collect();
        let env_keys: BTreeSet<String> =
            known_keys::<NetworkConfig>().into_iter().chain(known_keys::<TaskDistribution>()).collect();
        let mut known = run_keys.clone();
        known.extend(env_keys.iter().cloned());
        known.insert(ENV_PATH_KEY.into());
        reject_unknown(&table, &known)?;

        let run: RunConfig = from_table(&table)?;
        let inline_env = table.keys().any(|k| env_keys.contains(k));
        let env = match table.get(ENV_PATH_KEY) {
            Some(toml::Value::String(p)) => {
                if inline_env {
                    return Err(Error::config("environment keys given both inline and via env_config"));
                }
                EnvConfig::load(&base.join(p))?
            }
            Some(_) => return Err(Error::config("env_config must be a string path")),
            None => {
                let env_table: toml::Table =
                    table.iter().filter(|(k, _)| env_keys.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
                EnvConfig::from_toml_str(&toml::to_string(&env_table).map_err(|e| Error::config(e.to_string()))?)?
            }
        };
        let setup = RunSetup { run, env };
        setup.validate()?;
        Ok(setup)
    }

    pub fn load(path: &Path) -> Result<RunSetup> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Self::from_toml_str(&text, &base)
    }

    /// Self-contained flat TOML (environment inlined).
    pub fn to_toml_string(&self) -> Result<String> {
        let mut table = toml::Table::new();
        for value in [
            toml::Value::try_from(&self.run),
            toml::Value::try_from(&self.env.network),
            toml::Value::try_from(&self.env.tasks),
        ] {
            match value.map_err(|e| Error::config(e.to_string()))? {
                toml::Value::Table(t) => table.extend(t),
                _ => unreachable!("structs serialize to tables"),
            }
        }
        toml::to_string(&table).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if r.n_episodes == 0 {
            return Err(Error::config("n_episodes must be at least 1"));
        }
        if r.eval_interval == 0 || r.eval_tasks == 0 || r.eval_episodes == 0 {
            return Err(Error::config("eval_interval, eval_tasks and eval_episodes must be at least 1"));
        }
        if r.ppo_batch_episodes == 0 {
            return Err(Error::config("ppo_batch_episodes must be at least 1"));
        }
        self.env.network.validate()?;
        self.env.tasks.validate()?;
        self.arch_spec(self.arch_kind()?).validate()?;
        self.loss_config().validate()?;
        self.meta_config().validate()?;
        self.ppo_config().validate()
    }

    /// Architecture implied by the algorithm name.
    pub fn arch_kind(&self) -> Result<ArchKind> {
        super::AlgorithmRegistry::default().get(&self.run.algorithm).map(|a| a.arch())
    }

    pub fn arch_spec(&self, kind: ArchKind) -> ArchSpec {
        let net = &self.env.network;
        ArchSpec {
            hidden_size: self.run.hidden_size,
            n_heads: self.run.n_heads,
            layer_sizes: self.run.layer_sizes.clone(),
            ..ArchSpec::new(kind, crate::env::observation_len(net), net.n_links(), net.n_levels)
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        let r = &self.run;
        LossConfig {
            gamma: r.gamma,
            gae_lambda: r.gae_lambda,
            value_coeff: r.value_coeff,
            entropy_coeff: r.entropy_coeff,
            reward_scale: r.reward_scale,
        }
    }

    pub fn meta_config(&self) -> MetaConfig {
        let r = &self.run;
        let per_iter = MetaConfig {
            inner_lr: r.inner_lr,
            meta_lr: r.meta_lr,
            meta_batch_size: r.meta_batch_size,
            inner_steps: r.inner_steps,
            support_horizon: r.support_horizon,
            query_horizon: r.query_horizon,
            second_order: r.second_order,
            n_meta_iters: 0,
        };
        let per = per_iter.episodes_per_iteration(self.env.network.episode_len).max(1);
        MetaConfig { n_meta_iters: r.n_episodes.div_ceil(per), ..per_iter }
    }

    pub fn ppo_config(&self) -> PpoConfig {
        let r = &self.run;
        PpoConfig {
            loss: self.loss_config(),
            clip_eps: r.clip_eps,
            epochs: r.ppo_epochs,
            minibatch: r.ppo_minibatch,
            learning_rate: r.ppo_lr,
        }
    }
}
