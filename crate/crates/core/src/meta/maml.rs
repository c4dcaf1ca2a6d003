use rayon::prelude::*;

use super::{AdaptationTask, MetaConfig, Phase};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{GradSet, ParamSet, ParamVars};
use crate::rl::Trajectory;

#[derive(Debug, Clone)]
pub struct AdaptationResult {
    pub adapted_params: ParamSet,
    /// Loss at `θ` on the first support set.
    pub support_loss: f64,
    /// Loss at `θ'` on the query set.
    pub query_loss: f64,
    pub query_trajectories: Vec<Trajectory>,
}

struct Adapted<'t> {
    params: ParamVars<'t>,
    support_loss: f64,
    query: Var<'t>,
    query_trajectories: Vec<Trajectory>,
}

/// Inner loop on an existing tape: `inner_steps` updates `θ ← θ − α∇L_support`,
/// then the query loss at the result. Without `keep_graph` the inner
/// gradients are detached.
fn adapt_on_tape<'t, T: AdaptationTask + ?Sized>(
    tape: &'t Tape,
    theta: &ParamVars<'t>,
    task: &T,
    cfg: &MetaConfig,
    keep_graph: bool,
) -> Result<Adapted<'t>> {
    let mut params = theta.clone();
    let mut support_loss = f64::NAN;
    for step in 0..cfg.inner_steps {
        let loss = task.loss(tape, &params, Phase::Support(step))?.loss;
        if step == 0 {
            support_loss = loss.item();
        }
        let mut grads = params.grad(loss)?;
        if !keep_graph {
            grads = grads.detached(tape);
        }
        params = params.functional_update(&grads, cfg.inner_lr)?;
    }
    let query = task.loss(tape, &params, Phase::Query)?;
    Ok(Adapted { params, support_loss, query: query.loss, query_trajectories: query.trajectories })
}

impl Adapted<'_> {
    fn result(self) -> AdaptationResult {
        AdaptationResult {
            adapted_params: self.params.values(),
            support_loss: self.support_loss,
            query_loss: self.query.item(),
            query_trajectories: self.query_trajectories,
        }
    }
}

/// Adapts `theta` to `task`; `theta` itself is never modified.
pub fn inner_adapt<T: AdaptationTask + ?Sized>(theta: &ParamSet, task: &T, cfg: &MetaConfig) -> Result<AdaptationResult> {
    cfg.validate()?;
    let tape = Tape::new();
    let vars = theta.to_vars(&tape);
    Ok(adapt_on_tape(&tape, &vars, task, cfg, false)?.result())
}

/// Query loss at `θ` and at `θ'`, both on the query phase's data stream.
pub fn adaptation_gain<T: AdaptationTask + ?Sized>(theta: &ParamSet, task: &T, cfg: &MetaConfig) -> Result<(f64, f64)> {
    let tape = Tape::new();
    let pre = task.loss(&tape, &theta.to_constants(&tape), Phase::Query)?.loss.item();
    let post = inner_adapt(theta, task, cfg)?.query_loss;
    Ok((pre, post))
}

/// `(1/B) Σ L_query(θ'_i)` as one node on `tape`, differentiable w.r.t.
/// `theta` (through the inner updates when `second_order`).
pub fn meta_loss<'t, T: AdaptationTask>(
    tape: &'t Tape,
    theta: &ParamVars<'t>,
    tasks: &[T],
    cfg: &MetaConfig,
) -> Result<(Var<'t>, Vec<AdaptationResult>)> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::contract("meta batch is empty"));
    }
    let mut total: Option<Var<'t>> = None;
    let mut results = Vec::with_capacity(tasks.len());
    for task in tasks {
        let adapted = adapt_on_tape(tape, theta, task, cfg, cfg.second_order)?;
        let q = adapted.query;
        total = Some(match total {
            Some(t) => t + q,
            None => q,
        });
        results.push(adapted.result());
    }
    let loss = total.expect("nonempty batch").scale(1.0 / tasks.len() as f64);
    Ok((loss, results))
}

#[derive(Debug, Clone)]
pub struct MetaGradient {
    pub loss: f64,
    pub grads: GradSet,
    pub results: Vec<AdaptationResult>,
}

/// Gradient of [`meta_loss`], with each task differentiated on its own tape
/// in parallel. Per-task gradients are summed in task order.
pub fn meta_gradient<T: AdaptationTask>(theta: &ParamSet, tasks: &[T], cfg: &MetaConfig) -> Result<MetaGradient> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::contract("meta batch is empty"));
    }
    let per_task: Vec<(GradSet, AdaptationResult)> = tasks
        .par_iter()
        .map(|task| {
            let tape = Tape::new();
            let vars = theta.to_vars(&tape);
            let adapted = adapt_on_tape(&tape, &vars, task, cfg, cfg.second_order)?;
            let grads = vars.grad(adapted.query)?.to_grad_set();
            Ok((grads, adapted.result()))
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / tasks.len() as f64;
    let mut grads = GradSet::zeros_like(theta);
    let mut loss = 0.0;
    let mut results = Vec::with_capacity(per_task.len());
    for (g, r) in per_task {
        grads.add_scaled(&g, scale)?;
        loss += r.query_loss;
        results.push(r);
    }
    loss *= scale;
    if !loss.is_finite() || !grads.all_finite() {
        return Err(Error::Divergence("non-finite meta-loss or meta-gradient".into()));
    }
    Ok(MetaGradient { loss, grads, results })
}
