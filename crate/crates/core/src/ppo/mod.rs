//! Multi-agent PPO with generalized advantage estimation, parameter
//! sharing, and a decentralized critic.

mod batch;
mod config;
mod gae;
mod train;
mod update;

pub use batch::{act, collect_rollouts, to_env_action, PendingStep, Transition, TrajectoryBatch};
pub use config::TrainerConfig;
pub use gae::{compute_gae, normalize_advantages};
pub use train::{train, EnvSpec, IterStats, TrainResult};
pub use update::{ppo_update, Adam, UpdateStats};

use thiserror::Error;

use crate::autodiff::AdError;
use crate::envs::EnvError;
use crate::nets::NetError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("bad trainer config: {0}")]
    BadConfig(String),
    #[error("environment failure in episode {episode}: {source}")]
    EnvContext {
        episode: usize,
        source: EnvError,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ad(#[from] AdError),
}
