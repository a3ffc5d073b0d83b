//! Policy evaluation rollouts that need only the policy network: the
//! critic plays no role once training is done.

use e2gn2_core::autodiff::Tape;
use e2gn2_core::envs::{build_graph, AgentAction, Env, Team, MAX_THRUST};
use e2gn2_core::nets::NetworkParams;
use e2gn2_core::ppo::to_env_action;
use rand_chacha::ChaCha8Rng;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    /// Shared reward per step.
    pub rewards: Vec<f64>,
    pub win: Option<bool>,
}

impl EpisodeOutcome {
    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn win_value(&self) -> f64 {
        match self.win {
            Some(true) => 1.0,
            _ => 0.0,
        }
    }
}

/// Roll the policy out to episode end. With `rng = None` the
/// deterministic mean/argmax action is taken every step.
pub fn run_episode(
    policy: &NetworkParams,
    env: &mut dyn Env,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<EpisodeOutcome, CliError> {
    let mut rewards = Vec::new();
    let mut win = None;
    loop {
        let state = env.state();
        let graph = build_graph(state)?;
        let enemy_nodes = state.team_indices(Team::Enemy);
        let enemy_alive: Vec<bool> =
            enemy_nodes.iter().map(|&i| state.entities[i].alive).collect();
        let agent_nodes: Vec<usize> = state
            .entities
            .iter()
            .enumerate()
            .filter(|(_, e)| e.team == Team::Agent && e.alive)
            .map(|(i, _)| i)
            .collect();
        if agent_nodes.is_empty() {
            break;
        }

        let mut tape = Tape::new();
        let mut binder = policy.binder();
        let emb = policy.forward(&mut tape, &mut binder, &graph)?;
        let mut actions: Vec<AgentAction> = Vec::with_capacity(agent_nodes.len());
        for &node in &agent_nodes {
            let heads = if env.has_modes() {
                policy.policy_heads(&mut tape, &mut binder, &emb, node, &enemy_nodes, &enemy_alive)?
            } else {
                policy.policy_heads(&mut tape, &mut binder, &emb, node, &[], &[])?
            };
            let dist = policy.distribution(&tape, &heads);
            let sample = match rng.as_deref_mut() {
                Some(r) => dist.sample(r),
                None => dist.deterministic(),
            };
            actions.push(to_env_action(&sample, MAX_THRUST));
        }

        let result = env.step(&actions)?;
        rewards.push(result.rewards.first().copied().unwrap_or(0.0));
        if let Some(w) = result.win {
            win = Some(win.unwrap_or(false) || w);
        }
        if result.done {
            break;
        }
    }
    Ok(EpisodeOutcome { rewards, win })
}

/// Seed for episode `i` of an evaluation run.
pub fn episode_seed(base: u64, i: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(i.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
