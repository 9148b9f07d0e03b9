//! Tabular PPO over a hidden-parameter family with optional reward augmentation.

mod config;
mod evaluate;
mod rollout;
mod trainer;

pub use config::{Algorithm, TrainerConfig};
pub use evaluate::{
    evaluate_per_theta, exact_episodic_return, exact_per_theta, weighted_mean, EvalMode,
};
pub use rollout::{rollout, rollout_one, Step, Trajectory, DEFAULT_HORIZON};
pub use trainer::{train, IterationStats, TrainOutcome, TrainReport};
