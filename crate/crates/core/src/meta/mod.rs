//! Bi-level meta-learning: per-task inner adaptation and the outer
//! meta-update over task batches.

mod config;
mod learner;
mod maml;
mod task;

pub use config::MetaConfig;
pub use learner::{
    evaluate_adapted, evaluate_policy, evaluate_policy_trajectory, trajectory_metrics, write_training_log,     IterationLog, MetaLearner,
};
pub use maml::{adaptation_gain, inner_adapt, meta_gradient, meta_loss, AdaptationResult, MetaGradient};
pub use task::{AdaptationTask, Phase, PhaseLoss, QuadraticTask, RlTask};
