use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use super::{inner_adapt, meta_gradient, AdaptationTask, MetaConfig, RlTask};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamState, ParamSet};
use crate::rl::{collect_trajectory, EpisodeMetrics, Trajectory};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub support_loss: f64,
    pub query_loss: f64,
    pub wall_time_s: f64,
}

/// Outer loop state: meta-parameters and their Adam moments.
#[derive(Debug, Clone)]
pub struct MetaLearner {
    pub cfg: MetaConfig,
    pub params: ParamSet,
    opt: AdamState,
    adam: Adam,
    iteration: usize,
    started: Instant,
    log: Vec<IterationLog>,
}

impl MetaLearner {
    pub fn new(params: ParamSet, cfg: MetaConfig) -> Result<Self> {
        cfg.validate()?;
        let adam = Adam::new(cfg.meta_lr);
        Ok(MetaLearner { cfg, opt: adam.init(&params), params, adam, iteration: 0, started: Instant::now(), log: Vec::new() })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn log(&self) -> &[IterationLog] {
        &self.log
    }

    /// One meta-update on `tasks`.
    pub fn step<T: AdaptationTask>(&mut self, tasks: &[T]) -> Result<IterationLog> {
        let mg = meta_gradient(&self.params, tasks, &self.cfg)?;
        let (params, opt) = self.adam.step(&self.params, &mg.grads, &self.opt)?;
        if !params.all_finite() {
            return Err(Error::Divergence(format!("non-finite meta-parameters at iteration {}", self.iteration)));
        }
        self.params = params;
        self.opt = opt;
        let n = mg.results.len() as f64;
        let entry = IterationLog {
            iteration: self.iteration,
            support_loss: mg.results.iter().map(|r| r.support_loss).sum::<f64>() / n,
            query_loss: mg.loss,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        self.iteration += 1;
        self.log.push(entry);
        Ok(entry)
    }

    /// Runs `n_meta_iters` updates, drawing each batch from `sample`.
    pub fn train<T: AdaptationTask>(&mut self, mut sample: impl FnMut(usize) -> Result<Vec<T>>) -> Result<()> {
        for _ in 0..self.cfg.n_meta_iters {
            let tasks = sample(self.iteration)?;
            self.step(&tasks)?;
        }
        Ok(())
    }

    pub fn write_log<W: Write>(&self, out: W) -> Result<()> {
        write_training_log(&self.log, out)
    }
}

pub fn write_training_log<W: Write>(log: &[IterationLog], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "support_loss", "query_loss", "wall_time_s"])?;
    for e in log {
        w.write_record([
            e.iteration.to_string(),
            format!("{}", e.support_loss),
            format!("{}", e.query_loss),
            format!("{:.3}", e.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const EVAL_STREAM: u64 = 0xE7A1;

/// Adapts to `task`, then rolls the adapted policy for `n_episodes` complete
/// episodes without further updates. Returns the field-wise mean.
pub fn evaluate_adapted(theta: &ParamSet, task: &RlTask<'_>, cfg: &MetaConfig, n_episodes: usize) -> Result<EpisodeMetrics> {
    let adapted = inner_adapt(theta, task, cfg)?.adapted_params;
    evaluate_policy(&adapted, task, n_episodes)
}

/// Rolls `params` unchanged in the task for `n_episodes` episodes.
pub fn evaluate_policy(params: &ParamSet, task: &RlTask<'_>, n_episodes: usize) -> Result<EpisodeMetrics> {
    Ok(trajectory_metrics(&evaluate_policy_trajectory(params, task, n_episodes)?))
}

/// The rollout behind [`evaluate_policy`].
pub fn evaluate_policy_trajectory(params: &ParamSet, task: &RlTask<'_>, n_episodes: usize) -> Result<Trajectory> {
    let episode_len = task.env.config().episode_len;
    let mut rng = stream(task.rollout_seed, EVAL_STREAM);
    collect_trajectory(task.net, params, &task.env, episode_len * n_episodes.max(1), &mut rng)
}

/// Mean of the per-episode metrics of `traj`.
pub fn trajectory_metrics(traj: &Trajectory) -> EpisodeMetrics {
    let per_episode: Vec<EpisodeMetrics> = traj
        .episodes()
        .into_iter()
        .enumerate()
        .map(|(i, r)| EpisodeMetrics::from_steps(i, &traj.steps[r]))
        .collect();
    EpisodeMetrics::mean(0, &per_episode)
}
