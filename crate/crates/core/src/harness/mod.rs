//! Experiment orchestration: run configuration, the algorithm registry,
//! budgeted training with periodic held-out evaluation, and reports.

mod algorithm;
mod config;
mod metrics;
mod run;

pub use algorithm::{
    eval_task_seed, train_task_seed, Algorithm, AlgorithmRegistry, Maml, Observer, Ppo, TrainContext, TrainOutcome,
    EVAL_SEED_BASE,
};
pub use config::{RunConfig, RunSetup};
pub use metrics::{compare_report, MetricsLog, SummaryRow};
pub use run::{
    evaluate_checkpoint, metrics_from_dumps, run_experiment, write_task_evaluations, EvalDump, RunOutput,
    TaskEvaluation,
};
