//! Deterministic, seedable multi-agent environments with a shared
//! double-integrator, graph observations, and orthogonal symmetry
//! transforms.

mod graph_obs;
mod skirmish;
mod spread;
mod symmetry;
mod tag;
mod trace;
mod world;

pub use graph_obs::{build_graph, observe_graph, CHANNELS, H_DIM};
pub use skirmish::{
    InitScheme, Skirmish, ATTACK_RANGE, DAMAGE, MAP_RADIUS, SKIRMISH_HORIZON, SPAWN_RADIUS,
    UNIT_HP,
};
pub use spread::{Spread, SPREAD_HORIZON};
pub use symmetry::{apply_symmetry, SymmetryTransform};
pub use tag::{Tag, CONTACT_RADIUS, TAG_HORIZON};
pub use trace::TraceWriter;
pub use world::{
    clip_norm, dist, integrate, norm, AgentAction, Entity, StepResult, Team, WorldState, DAMPING,
    DT, MAX_SPEED, MAX_THRUST,
};

use thiserror::Error;

use crate::nets::NetError;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
    #[error("agent {0} is dead and has no observation")]
    DeadAgent(usize),
    #[error("unknown initialization scheme '{0}' (expected left, right, or all)")]
    UnknownScheme(String),
    #[error("transform is not orthogonal: {0}")]
    NonOrthogonal(String),
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Common environment surface. All stochasticity happens at reset; step is
/// a deterministic function of state and actions.
pub trait Env {
    fn n_agents(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Whether actions carry discrete mode/target heads.
    fn has_modes(&self) -> bool;
    /// Targetable enemy count (zero when the action space is move-only).
    fn n_enemies(&self) -> usize;
    fn state(&self) -> &WorldState;
    fn set_state(&mut self, s: WorldState);
    fn reset(&mut self, seed: u64);
    fn step(&mut self, actions: &[AgentAction]) -> Result<StepResult, EnvError>;
}

/// Environment names accepted by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvName {
    Spread,
    Tag,
    Skirmish,
}

impl EnvName {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spread" => Some(EnvName::Spread),
            "tag" => Some(EnvName::Tag),
            "skirmish" => Some(EnvName::Skirmish),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvName::Spread => "spread",
            EnvName::Tag => "tag",
            EnvName::Skirmish => "skirmish",
        }
    }
}
