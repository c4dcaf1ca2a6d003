//! Rollouts, advantage estimation, policy-gradient losses and the PPO
//! baseline.

mod gae;
mod loss;
mod metrics;
mod ppo;
mod trajectory;

pub use gae::{compute_gae, compute_gae_scaled, normalize, AdvantageEstimate};
pub use loss::{evaluate_segments, pg_loss, task_loss, Batch, LossConfig, LossTerms, PolicyEval};
pub use metrics::EpisodeMetrics;
pub use ppo::{clipped_loss, ppo_update, PpoConfig, PpoStats};
pub use trajectory::{collect_trajectory, Trajectory, Transition};
