use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eval_task_seed, AlgorithmRegistry, MetricsLog, RunSetup, TrainContext};
use crate::env::RewardBreakdown;
use crate::error::{Error, Result};
use crate::meta::trajectory_metrics;
use crate::nn::{build_policy, Checkpoint, ParamSet};
use crate::rl::{EpisodeMetrics, Trajectory};
use crate::rng::stream;

const INIT_STREAM: u64 = 0x1A17;

/// Reward breakdowns of one evaluation rollout, grouped by episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDump {
    pub episode: usize,
    pub task_seed: u64,
    pub episodes: Vec<Vec<RewardBreakdown>>,
}

impl EvalDump {
    fn from_trajectory(episode: usize, traj: &Trajectory) -> EvalDump {
        let episodes = traj.episodes().into_iter().map(|r| traj.steps[r].iter().map(|s| s.parts).collect()).collect();
        EvalDump { episode, task_seed: traj.task_seed, episodes }
    }
}

/// Recomputes one evaluation row from the dumps of all its tasks.
pub fn metrics_from_dumps(episode: usize, dumps: &[EvalDump]) -> EpisodeMetrics {
    let per_task: Vec<EpisodeMetrics> = dumps
        .iter()
        .map(|d| {
            let per_episode: Vec<EpisodeMetrics> = d
                .episodes
                .iter()
                .enumerate()
                .map(|(i, parts)| {
                    let steps: Vec<crate::rl::Transition> = parts
                        .iter()
                        .map(|&p| crate::rl::Transition {
                            obs: Vec::new(),
                            action: Vec::new(),
                            log_prob: 0.0,
                            reward: 0.0,
                            value: 0.0,
                            done: false,
                            parts: p,
                        })
                        .collect();
                    EpisodeMetrics::from_steps(i, &steps)
                })
                .collect();
            EpisodeMetrics::mean(0, &per_episode)
        })
        .collect();
    EpisodeMetrics::mean(episode, &per_task)
}

pub struct RunOutput {
    pub metrics: MetricsLog,
    pub checkpoint: Checkpoint,
    pub episodes_consumed: usize,
    pub train_log: Vec<u8>,
    pub dumps: Vec<EvalDump>,
}

fn evaluate_all(
    ctx: &TrainContext<'_>,
    algorithm: &dyn super::Algorithm,
    params: &ParamSet,
    tasks: Range<u64>,
) -> Result<Vec<Trajectory>> {
    let tasks: Vec<_> = tasks.map(|i| ctx.eval_task(i)).collect::<Result<_>>()?;
    tasks.par_iter().map(|t| algorithm.evaluate(ctx, params, t)).collect()
}

/// Trains the configured algorithm under the episode budget, evaluating on
/// held-out tasks every `eval_interval` consumed episodes and once at the end.
pub fn run_experiment(setup: &RunSetup) -> Result<RunOutput> {
    setup.validate()?;
    let registry = AlgorithmRegistry::default();
    let algorithm = registry.get(&setup.run.algorithm)?;
    let spec = setup.arch_spec(algorithm.arch());
    let net = build_policy(&spec)?;
    let ctx = TrainContext { setup, net: net.as_ref() };
    let init = net.init_params(&mut stream(setup.run.seed, INIT_STREAM));

    let run = &setup.run;
    let mut metrics = MetricsLog::default();
    let mut dumps = Vec::new();
    let mut next_eval = run.eval_interval;
    let mut record = |episode: usize, params: &ParamSet, metrics: &mut MetricsLog| -> Result<()> {
        let trajs = evaluate_all(&ctx, algorithm, params, 0..run.eval_tasks as u64)?;
        let per_task: Vec<EpisodeMetrics> = trajs.iter().map(trajectory_metrics).collect();
        metrics.rows.push(EpisodeMetrics::mean(episode, &per_task));
        if run.dump_trajectories {
            dumps.extend(trajs.iter().map(|t| EvalDump::from_trajectory(episode, t)));
        }
        Ok(())
    };
    let mut observe = |consumed: usize, params: &ParamSet| -> Result<()> {
        if consumed >= next_eval {
            record(consumed, params, &mut metrics)?;
            next_eval = (consumed / run.eval_interval + 1) * run.eval_interval;
        }
        Ok(())
    };
    let outcome = algorithm.train(&ctx, init, &mut observe)?;
    if metrics.rows.last().map(|r| r.episode) != Some(outcome.episodes_consumed) {
        record(outcome.episodes_consumed, &outcome.params, &mut metrics)?;
    }

    let mut checkpoint = Checkpoint { arch: spec, metadata: Default::default(), params: outcome.params };
    checkpoint.metadata.insert("algorithm".into(), run.algorithm.clone());
    checkpoint.metadata.insert("episodes".into(), outcome.episodes_consumed.to_string());
    checkpoint.metadata.insert("run_config".into(), setup.to_toml_string()?);
    Ok(RunOutput { metrics, checkpoint, episodes_consumed: outcome.episodes_consumed, train_log: outcome.train_log, dumps })
}

impl RunOutput {
    /// Writes `metrics.csv`, `checkpoint.bin`, `train_log.csv`, `config.toml`
    /// and, if collected, `eval_dump.jsonl` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let metrics = dir.join("metrics.csv");
        self.metrics.save(&metrics)?;
        written.push(metrics);
        let ckpt = dir.join("checkpoint.bin");
        self.checkpoint.save(&ckpt)?;
        written.push(ckpt);
        let log = dir.join("train_log.csv");
        std::fs::write(&log, &self.train_log)?;
        written.push(log);
        let cfg = dir.join("config.toml");
        std::fs::write(&cfg, self.checkpoint.metadata.get("run_config").map(String::as_str).unwrap_or(""))?;
        written.push(cfg);
        if !self.dumps.is_empty() {
            let path = dir.join("eval_dump.jsonl");
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            for d in &self.dumps {
                serde_json::to_writer(&mut f, d).map_err(|e| Error::Io(e.into()))?;
                f.write_all(b"\n")?;
            }
            f.flush()?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Per-task evaluation row of a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskEvaluation {
    pub task: u64,
    pub task_seed: u64,
    pub metrics: EpisodeMetrics,
}

/// Evaluates a checkpoint written by [`run_experiment`] on held-out tasks
/// `tasks`, with the run's own test-time procedure.
pub fn evaluate_checkpoint(path: &Path, tasks: Range<u64>) -> Result<Vec<TaskEvaluation>> {
    let checkpoint = Checkpoint::load(path)?;
    let text = checkpoint
        .metadata
        .get("run_config")
        .ok_or_else(|| Error::Schema("checkpoint has no run_config metadata".into()))?;
    let setup = RunSetup::from_toml_str(text, Path::new("."))?;
    let registry = AlgorithmRegistry::default();
    let algorithm = registry.get(&setup.run.algorithm)?;
    let spec = setup.arch_spec(algorithm.arch());
    if spec != checkpoint.arch {
        return Err(Error::Schema("checkpoint architecture does not match its run_config".into()));
    }
    checkpoint.check_params()?;
    let net = build_policy(&spec)?;
    let ctx = TrainContext { setup: &setup, net: net.as_ref() };
    let trajs = evaluate_all(&ctx, algorithm, &checkpoint.params, tasks.clone())?;
    Ok(tasks
        .zip(trajs)
        .map(|(task, t)| TaskEvaluation { task, task_seed: eval_task_seed(task), metrics: trajectory_metrics(&t) })
        .collect())
}

pub fn write_task_evaluations<W: Write>(rows: &[TaskEvaluation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["task", "sinr_violations", "throughput_mbps", "latency_violations", "fairness"])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.task.to_string(),
            format!("{}", m.sinr_violations),
            format!("{}", m.throughput_mbps),
            format!("{}", m.latency_violations),
            format!("{}", m.fairness),
        ])?;
    }
    w.flush()?;
    Ok(())
}
