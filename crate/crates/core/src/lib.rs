//! Spectrum-allocation CMDP simulator and meta-reinforcement-learning stack.
//!
//! * [`env`]: the wireless environment (path loss, AR(1) fading, SINR,
//!   interference-threshold safety filter, multi-objective reward).
//! * [`autodiff`] and [`nn`]: a small reverse-mode differentiator with
//!   higher-order support, and MLP / GRU / GRU+attention policies.
//! * [`rl`]: trajectory collection, GAE, the policy-gradient task loss, PPO.
//! * [`meta`]: the two-level MAML loop.
//! * [`harness`]: experiment orchestration, metrics, comparison reports.

pub mod autodiff;
pub mod env;
pub mod error;
pub mod harness;
pub mod meta;
pub mod nn;
pub mod rl;
pub mod rng;

pub use error::{Error, Result};
