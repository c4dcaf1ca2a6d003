use std::collections::BTreeMap;

use rayon::prelude::*;

use super::RunSetup;
use crate::env::{task_from_seed, Env};
use crate::error::{Error, Result};
use crate::meta::{evaluate_policy_trajectory, inner_adapt, write_training_log, MetaLearner, RlTask};
use crate::nn::{ArchKind, ParamSet, PolicyNet};
use crate::rl::{collect_trajectory, ppo_update, Trajectory};
use crate::rng::{derive_seed, stream};

/// Held-out evaluation tasks use seeds at or above this value; training
/// task seeds stay below it.
pub const EVAL_SEED_BASE: u64 = 1 << 40;
const EVAL_ROLLOUT_STREAM: u64 = 0xE7A1_5EED;

pub fn train_task_seed(run_seed: u64, index: u64) -> u64 {
    derive_seed(run_seed, index) % EVAL_SEED_BASE
}

pub fn eval_task_seed(index: u64) -> u64 {
    EVAL_SEED_BASE + index
}

/// Everything an algorithm needs besides its own parameters.
pub struct TrainContext<'a> {
    pub setup: &'a RunSetup,
    pub net: &'a dyn PolicyNet,
}

impl<'a> TrainContext<'a> {
    fn task(&self, task_seed: u64, rollout_seed: u64) -> Result<RlTask<'a>> {
        let cfg = &self.setup.env;
        let spec = task_from_seed(&cfg.tasks, &cfg.network, task_seed);
        let meta = self.setup.meta_config();
        Ok(RlTask {
            net: self.net,
            env: Env::new(cfg.network.clone(), spec)?,
            loss_cfg: self.setup.loss_config(),
            support_horizon: meta.support_horizon,
            query_horizon: meta.query_horizon,
            rollout_seed,
        })
    }

    /// `index`-th training task of this run.
    pub fn train_task(&self, index: u64) -> Result<RlTask<'a>> {
        let seed = train_task_seed(self.setup.run.seed, index);
        self.task(seed, derive_seed(seed, self.setup.run.seed))
    }

    /// Held-out task; its rollouts do not depend on the run seed.
    pub fn eval_task(&self, index: u64) -> Result<RlTask<'a>> {
        let seed = eval_task_seed(index);
        self.task(seed, derive_seed(seed, EVAL_ROLLOUT_STREAM))
    }
}

pub struct TrainOutcome {
    pub params: ParamSet,
    pub episodes_consumed: usize,
    /// Per-update training log as CSV.
    pub train_log: Vec<u8>,
}

/// Called after every update with the episodes consumed so far.
pub type Observer<'o> = dyn FnMut(usize, &ParamSet) -> Result<()> + 'o;

/// A training procedure selectable by name.
pub trait Algorithm: Send + Sync {
    fn name(&self) -> &'static str;

    fn arch(&self) -> ArchKind;

    fn train(&self, ctx: &TrainContext<'_>, init: ParamSet, observe: &mut Observer<'_>) -> Result<TrainOutcome>;

    /// Evaluation rollout of `params` on `task` (after any test-time
    /// adaptation the algorithm performs).
    fn evaluate(&self, ctx: &TrainContext<'_>, params: &ParamSet, task: &RlTask<'_>) -> Result<Trajectory>;
}

/// Bi-level meta-training of one architecture.
pub struct Maml {
    name: &'static str,
    arch: ArchKind,
}

impl Algorithm for Maml {
    fn name(&self) -> &'static str {
        self.name
    }

    fn arch(&self) -> ArchKind {
        self.arch
    }

    fn train(&self, ctx: &TrainContext<'_>, init: ParamSet, observe: &mut Observer<'_>) -> Result<TrainOutcome> {
        let cfg = ctx.setup.meta_config();
        let per_iter = cfg.episodes_per_iteration(ctx.setup.env.network.episode_len);
        let mut learner = MetaLearner::new(init, cfg)?;
        let mut consumed = 0;
        for it in 0..cfg.n_meta_iters {
            let b = cfg.meta_batch_size as u64;
            let tasks = (0..b).map(|i| ctx.train_task(it as u64 * b + i)).collect::<Result<Vec<_>>>()?;
            learner.step(&tasks)?;
            consumed += per_iter;
            observe(consumed, &learner.params)?;
        }
        let mut train_log = Vec::new();
        write_training_log(learner.log(), &mut train_log)?;
        Ok(TrainOutcome { params: learner.params, episodes_consumed: consumed, train_log })
    }

    fn evaluate(&self, ctx: &TrainContext<'_>, params: &ParamSet, task: &RlTask<'_>) -> Result<Trajectory> {
        let adapted = inner_adapt(params, task, &ctx.setup.meta_config())?.adapted_params;
        evaluate_policy_trajectory(&adapted, task, ctx.setup.run.eval_episodes)
    }
}

/// Clipped-surrogate PPO on a stream of training tasks, one task per
/// collected episode.
pub struct Ppo;

impl Algorithm for Ppo {
    fn name(&self) -> &'static str {
        "ppo"
    }

    fn arch(&self) -> ArchKind {
        ArchKind::Mlp
    }

    fn train(&self, ctx: &TrainContext<'_>, init: ParamSet, observe: &mut Observer<'_>) -> Result<TrainOutcome> {
        let cfg = ctx.setup.ppo_config();
        let run = &ctx.setup.run;
        let episode_len = ctx.setup.env.network.episode_len;
        let mut params = init;
        let mut opt = crate::nn::Adam::new(cfg.learning_rate).init(&params);
        let mut update_rng = stream(run.seed, 0x9900);
        let mut consumed = 0;
        let mut log = csv::Writer::from_writer(Vec::new());
        log.write_record(["update", "episodes", "loss_before", "loss_after", "approx_kl", "clip_fraction"])?;
        let mut update = 0usize;
        while consumed < run.n_episodes {
            let n = run.ppo_batch_episodes.min(run.n_episodes - consumed);
            let tasks = (0..n as u64).map(|i| ctx.train_task(consumed as u64 + i)).collect::<Result<Vec<_>>>()?;
            let trajs: Vec<Trajectory> = tasks
                .par_iter()
                .map(|t| collect_trajectory(ctx.net, &params, &t.env, episode_len, &mut stream(t.rollout_seed, 0x9901)))
                .collect::<Result<_>>()?;
            let (p, o, stats) = ppo_update(ctx.net, &params, &opt, &trajs, &cfg, &mut update_rng)?;
            params = p;
            opt = o;
            consumed += n;
            log.write_record([
                update.to_string(),
                consumed.to_string(),
                format!("{}", stats.loss_before),
                format!("{}", stats.loss_after),
                format!("{}", stats.approx_kl),
                format!("{}", stats.clip_fraction),
            ])?;
            update += 1;
            observe(consumed, &params)?;
        }
        let train_log = log.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(TrainOutcome { params, episodes_consumed: consumed, train_log })
    }

    fn evaluate(&self, ctx: &TrainContext<'_>, params: &ParamSet, task: &RlTask<'_>) -> Result<Trajectory> {
        evaluate_policy_trajectory(params, task, ctx.setup.run.eval_episodes)
    }
}

/// Name → algorithm table.
pub struct AlgorithmRegistry {
    entries: BTreeMap<&'static str, Box<dyn Algorithm>>,
}

impl Default for AlgorithmRegistry {
    fn default() -> Self {
        let mut r = AlgorithmRegistry { entries: BTreeMap::new() };
        r.register(Box::new(Maml { name: "maml_mlp", arch: ArchKind::Mlp }));
        r.register(Box::new(Maml { name: "maml_rnn", arch: ArchKind::Rnn }));
        r.register(Box::new(Maml { name: "maml_rnn_attention", arch: ArchKind::RnnAttention }));
        r.register(Box::new(Ppo));
        r
    }
}

impl AlgorithmRegistry {
    pub fn register(&mut self, algorithm: Box<dyn Algorithm>) {
        self.entries.insert(algorithm.name(), algorithm);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Algorithm> {
        self.entries.get(name).map(|b| b.as_ref()).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::config(format!("unknown algorithm `{name}` (known: {})", known.join(", ")))
        })
    }
}
