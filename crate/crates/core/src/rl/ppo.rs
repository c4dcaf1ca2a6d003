use std::ops::Range;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{evaluate_segments, Batch, LossConfig, Trajectory};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamState, ParamSet, ParamVars, PolicyNet};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub loss: LossConfig,
    pub clip_eps: f64,
    pub epochs: usize,
    /// Steps per minibatch (feed-forward) or episodes per minibatch (recurrent).
    pub minibatch: usize,
    pub learning_rate: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig { loss: LossConfig::default(), clip_eps: 0.2, epochs: 4, minibatch: 64, learning_rate: 3e-4 }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::config("clip_eps must lie in (0, 1)"));
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::config("epochs and minibatch must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PpoStats {
    /// Full-batch clipped loss at the behaviour parameters.
    pub loss_before: f64,
    /// Full-batch clipped loss after the update.
    pub loss_after: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub n_minibatches: usize,
}

/// Clipped surrogate objective, negated, plus value and entropy terms.
pub fn clipped_loss<'t>(
    new_log_probs: Var<'t>,
    old_log_probs: Var<'t>,
    advantages: Var<'t>,
    values: Var<'t>,
    returns: Var<'t>,
    entropy: Var<'t>,
    cfg: &PpoConfig,
) -> Var<'t> {
    let ratio = (new_log_probs - old_log_probs).exp();
    let unclipped = ratio * advantages;
    let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * advantages;
    let surrogate = unclipped.minimum(clipped).mean_all();
    let value = (values - returns).square().mean_all();
    -surrogate + value.scale(cfg.loss.value_coeff) - entropy.mean_all().scale(cfg.loss.entropy_coeff)
}

struct Minibatch {
    idx: Vec<usize>,
    segments: Vec<Range<usize>>,
}

fn minibatch_loss<'t>(
    net: &dyn PolicyNet,
    vars: &ParamVars<'t>,
    tape: &'t Tape,
    batch: &Batch<'_>,
    mb: &Minibatch,
    cfg: &PpoConfig,
) -> Result<(Var<'t>, Var<'t>, Vec<f64>)> {
    let steps: Vec<_> = mb.idx.iter().map(|&i| batch.steps[i]).collect();
    let eval = evaluate_segments(net, vars, tape, &steps, &mb.segments)?;
    let old: Vec<f64> = steps.iter().map(|s| s.log_prob).collect();
    let col = |xs: Vec<f64>| tape.constant(Tensor::column(xs));
    let loss = clipped_loss(
        eval.log_probs,
        col(old.clone()),
        col(mb.idx.iter().map(|&i| batch.advantages[i]).collect()),
        eval.values,
        col(mb.idx.iter().map(|&i| batch.returns[i]).collect()),
        eval.entropy,
        cfg,
    );
    Ok((loss, eval.log_probs, old))
}

fn full_batch(batch: &Batch<'_>) -> Minibatch {
    Minibatch { idx: (0..batch.len()).collect(), segments: batch.episodes.clone() }
}

fn split(batch: &Batch<'_>, recurrent: bool, size: usize, rng: &mut SimRng) -> Vec<Minibatch> {
    if recurrent {
        let mut eps = batch.episodes.clone();
        eps.shuffle(rng);
        eps.chunks(size)
            .map(|chunk| {
                let mut idx = Vec::new();
                let mut segments = Vec::new();
                for r in chunk {
                    segments.push(idx.len()..idx.len() + r.len());
                    idx.extend(r.clone());
                }
                Minibatch { idx, segments }
            })
            .collect()
    } else {
        let mut idx: Vec<usize> = (0..batch.len()).collect();
        idx.shuffle(rng);
        idx.chunks(size)
            .map(|c| Minibatch { idx: c.to_vec(), segments: vec![0..c.len()] })
            .collect()
    }
}

/// Several epochs of clipped-surrogate Adam updates on `trajs`, which must
/// have been collected with `params`.
pub fn ppo_update(
    net: &dyn PolicyNet,
    params: &ParamSet,
    opt: &AdamState,
    trajs: &[Trajectory],
    cfg: &PpoConfig,
    rng: &mut SimRng,
) -> Result<(ParamSet, AdamState, PpoStats)> {
    cfg.validate()?;
    let batch = Batch::new(trajs, &cfg.loss);
    if batch.is_empty() {
        return Err(Error::contract("PPO update on an empty batch"));
    }
    let adam = Adam::new(cfg.learning_rate);
    let whole = full_batch(&batch);
    let loss_before = {
        let tape = Tape::new();
        minibatch_loss(net, &params.to_constants(&tape), &tape, &batch, &whole, cfg)?.0.item()
    };

    let mut params = params.clone();
    let mut opt = opt.clone();
    let mut n_minibatches = 0;
    for _ in 0..cfg.epochs {
        for mb in split(&batch, net.is_recurrent(), cfg.minibatch, rng) {
            let tape = Tape::new();
            let vars = params.to_vars(&tape);
            let (loss, _, _) = minibatch_loss(net, &vars, &tape, &batch, &mb, cfg)?;
            let grads = vars.grad(loss)?.to_grad_set();
            if !loss.item().is_finite() || !grads.all_finite() {
                return Err(Error::Divergence("non-finite PPO loss or gradient".into()));
            }
            let (p, o) = adam.step(&params, &grads, &opt)?;
            params = p;
            opt = o;
            n_minibatches += 1;
        }
    }

    let tape = Tape::new();
    let (loss, new_lp, old_lp) = minibatch_loss(net, &params.to_constants(&tape), &tape, &batch, &whole, cfg)?;
    let n = old_lp.len() as f64;
    let mut kl = 0.0;
    let mut clipped = 0usize;
    for (new, old) in new_lp.value().data().iter().zip(&old_lp) {
        kl += old - new;
        if ((new - old).exp() - 1.0).abs() > cfg.clip_eps {
            clipped += 1;
        }
    }
    let stats = PpoStats {
        loss_before,
        loss_after: loss.item(),
        approx_kl: kl / n,
        clip_fraction: clipped as f64 / n,
        n_minibatches,
    };
    if !params.all_finite() {
        return Err(Error::Divergence("non-finite parameters after PPO update".into()));
    }
    Ok((params, opt, stats))
}
