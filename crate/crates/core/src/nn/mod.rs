//! Policy/value networks, the categorical action head, Adam, checkpoints.

mod arch;
mod checkpoint;
mod layers;
mod optim;
mod params;
mod policy;

pub use arch::{
    build_policy, policy_forward, ArchKind, ArchRegistry, ArchSpec, Carry, MlpPolicy, PolicyNet, PolicyOutput,
    RecurrentPolicy, SequenceOutput,
};
pub use checkpoint::Checkpoint;
pub use layers::{
    attention_forward, dense_forward, gru_step, recurrent_cell_step, Activation, AttentionOutput, GateInputs,
};
pub use optim::{adam_step, Adam, AdamState};
pub use params::{GradSet, ParamSet, ParamVars};
pub use policy::{action_log_prob, policy_entropy, sample_action};
