use crate::autodiff::{Tape, Var};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::nn::{ParamVars, PolicyNet};
use crate::rl::{collect_trajectory, task_loss, LossConfig, Trajectory};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Data for the `n`-th inner update.
    Support(usize),
    Query,
}

pub struct PhaseLoss<'t> {
    pub loss: Var<'t>,
    /// Rollouts the loss was computed on (empty for synthetic tasks).
    pub trajectories: Vec<Trajectory>,
}

/// A task the meta-learner can adapt to: it produces a differentiable loss
/// for given parameters on the data of a given phase.
pub trait AdaptationTask: Sync {
    fn loss<'t>(&self, tape: &'t Tape, params: &ParamVars<'t>, phase: Phase) -> Result<PhaseLoss<'t>>;
}

/// `L(θ) = (θ − c)²` on a scalar parameter named `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticTask {
    pub target: f64,
}

impl QuadraticTask {
    pub const PARAM: &'static str = "theta";
}

impl AdaptationTask for QuadraticTask {
    fn loss<'t>(&self, tape: &'t Tape, params: &ParamVars<'t>, _phase: Phase) -> Result<PhaseLoss<'t>> {
        let theta = params.get(Self::PARAM)?;
        if theta.value().shape() != [1, 1] {
            return Err(Error::shape("quadratic task needs a scalar parameter"));
        }
        let loss = (theta - tape.scalar(self.target)).square();
        Ok(PhaseLoss { loss, trajectories: Vec::new() })
    }
}

const SUPPORT_STREAM: u64 = 0x5u64 << 32;
const QUERY_STREAM: u64 = 0x9u64 << 32;

/// Policy-gradient task: roll out the current parameters in `env`, then
/// evaluate the task loss on those rollouts. Support and query phases draw
/// from distinct streams of `rollout_seed`; a phase's stream does not depend
/// on the parameters.
pub struct RlTask<'a> {
    pub net: &'a dyn PolicyNet,
    pub env: Env,
    pub loss_cfg: LossConfig,
    pub support_horizon: usize,
    pub query_horizon: usize,
    pub rollout_seed: u64,
}

impl RlTask<'_> {
    pub fn rollout(&self, params: &crate::nn::ParamSet, phase: Phase) -> Result<Trajectory> {
        let (horizon, id) = match phase {
            Phase::Support(step) => (self.support_horizon, SUPPORT_STREAM + step as u64),
            Phase::Query => (self.query_horizon, QUERY_STREAM),
        };
        let mut rng = stream(self.rollout_seed, id);
        collect_trajectory(self.net, params, &self.env, horizon, &mut rng)
    }
}

impl AdaptationTask for RlTask<'_> {
    fn loss<'t>(&self, tape: &'t Tape, params: &ParamVars<'t>, phase: Phase) -> Result<PhaseLoss<'t>> {
        let traj = self.rollout(&params.values(), phase)?;
        let trajectories = vec![traj];
        let loss = task_loss(self.net, params, tape, &trajectories, &self.loss_cfg)?.total;
        if !loss.item().is_finite() {
            return Err(Error::Divergence(format!("non-finite {phase:?} loss on task {}", self.env.task().seed)));
        }
        Ok(PhaseLoss { loss, trajectories })
    }
}
