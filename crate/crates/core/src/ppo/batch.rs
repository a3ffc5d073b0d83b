use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{build_graph, AgentAction, Env, Team};
use crate::autodiff::Tape;
use crate::nets::{ActionSample, GraphState, NetworkParams};
use crate::ppo::{TrainError, TrainerConfig};

/// One per-agent transition. Observation graphs are shared between the
/// agents that acted in the same world state.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Rc<GraphState>,
    pub agent_node: usize,
    pub enemy_nodes: Rc<Vec<usize>>,
    pub enemy_alive: Vec<bool>,
    pub action: ActionSample,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub advantage: f64,
    pub ret: f64,
    pub done: bool,
    pub agent_id: usize,
    pub episode_id: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryBatch {
    pub transitions: Vec<Transition>,
    /// Per-episode cumulative shared reward (one agent's view).
    pub episode_returns: Vec<f64>,
    pub episode_wins: Vec<Option<bool>>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn n_episodes(&self) -> usize {
        self.episode_returns.len()
    }
}

fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over the combined words
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(b.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Sample actions for every living agent of the current state with one
/// shared forward pass, and score values with the value network.
pub fn act(
    policy: &NetworkParams,
    value_net: &NetworkParams,
    env: &dyn Env,
    rng: &mut ChaCha8Rng,
    deterministic: bool,
    value_stats: (f64, f64),
) -> Result<Vec<PendingStep>, TrainError> {
    let state = env.state();
    let graph = Rc::new(build_graph(state)?);
    let enemy_nodes = Rc::new(state.team_indices(Team::Enemy));
    let enemy_alive: Vec<bool> = enemy_nodes
        .iter()
        .map(|&i| state.entities[i].alive)
        .collect();
    let agent_nodes: Vec<usize> = state
        .entities
        .iter()
        .enumerate()
        .filter(|(_, e)| e.team == Team::Agent && e.alive)
        .map(|(i, _)| i)
        .collect();

    let mut tape = Tape::new();
    let mut binder = policy.binder();
    let emb = policy.forward(&mut tape, &mut binder, &graph)?;

    let mut vtape = Tape::new();
    let mut vbinder = value_net.binder();
    let vemb = value_net.forward(&mut vtape, &mut vbinder, &graph)?;

    let mut out = Vec::with_capacity(agent_nodes.len());
    for (agent_id, &node) in agent_nodes.iter().enumerate() {
        let heads = if env.has_modes() {
            policy.policy_heads(&mut tape, &mut binder, &emb, node, &enemy_nodes, &enemy_alive)?
        } else {
            policy.policy_heads(&mut tape, &mut binder, &emb, node, &[], &[])?
        };
        let dist = policy.distribution(&tape, &heads);
        let action = if deterministic {
            dist.deterministic()
        } else {
            dist.sample(rng)
        };
        let log_prob = dist.log_prob(&action);
        let v = value_net.value(&mut vtape, &mut vbinder, &vemb, node)?;
        // The critic regresses normalized returns; undo that here so
        // advantage estimation sees values in reward units.
        let value = value_stats.0 + value_stats.1 * vtape.value(v).data[0];
        out.push(PendingStep {
            obs: Rc::clone(&graph),
            agent_node: node,
            enemy_nodes: Rc::clone(&enemy_nodes),
            enemy_alive: enemy_alive.clone(),
            action,
            log_prob,
            value,
            agent_id,
        });
    }
    Ok(out)
}

/// Per-agent act output waiting for the env step's reward.
pub struct PendingStep {
    pub obs: Rc<GraphState>,
    pub agent_node: usize,
    pub enemy_nodes: Rc<Vec<usize>>,
    pub enemy_alive: Vec<bool>,
    pub action: ActionSample,
    pub log_prob: f64,
    pub value: f64,
    pub agent_id: usize,
}

pub fn to_env_action(a: &ActionSample, movement_bound: f64) -> AgentAction {
    // Clip (not squash) at the env bound so the Gaussian log-prob stays exact.
    let m = [
        a.movement[0].clamp(-movement_bound, movement_bound),
        a.movement[1].clamp(-movement_bound, movement_bound),
    ];
    AgentAction { movement: m, mode: a.mode, target: a.target }
}

/// Roll out complete episodes until at least `config.train_batch`
/// transitions are recorded, interleaving `config.n_workers` independent
/// environment instances.
pub fn collect_rollouts(
    policy: &NetworkParams,
    value_net: &NetworkParams,
    env_factory: &mut dyn FnMut(u64) -> Result<Box<dyn Env>, TrainError>,
    config: &TrainerConfig,
    iteration: u64,
    value_stats: (f64, f64),
) -> Result<TrajectoryBatch, TrainError> {
    let mut batch = TrajectoryBatch::default();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, iteration, 0x617374));
    let mut episode_id = 0usize;
    let mut worker = 0u64;

    while batch.len() < config.train_batch {
        let seed = mix_seed(config.seed, iteration.wrapping_mul(1 + config.n_workers as u64) + worker, episode_id as u64);
        worker = (worker + 1) % config.n_workers as u64;
        let mut env = env_factory(seed)?;
        let mut ep_return = 0.0;
        let mut ep_win = None;
        let start = batch.transitions.len();
        loop {
            let pending = act(policy, value_net, env.as_ref(), &mut rng, false, value_stats)?;
            let actions: Vec<AgentAction> = pending
                .iter()
                .map(|p| to_env_action(&p.action, crate::envs::MAX_THRUST))
                .collect();
            let result = env.step(&actions).map_err(|e| {
                TrainError::EnvContext {
                    episode: episode_id,
                    source: e,
                }
            })?;
            ep_return += result.rewards.first().copied().unwrap_or(0.0);
            if let Some(w) = result.win {
                ep_win = Some(ep_win.unwrap_or(false) || w);
            }
            for (p, &reward) in pending.into_iter().zip(result.rewards.iter()) {
                batch.transitions.push(Transition {
                    obs: p.obs,
                    agent_node: p.agent_node,
                    enemy_nodes: p.enemy_nodes,
                    enemy_alive: p.enemy_alive,
                    action: p.action,
                    log_prob: p.log_prob,
                    reward,
                    value: p.value,
                    advantage: 0.0,
                    ret: 0.0,
                    done: false,
                    agent_id: p.agent_id,
                    episode_id,
                });
            }
            if result.done {
                break;
            }
        }
        // Mark terminal transitions: the last one of each agent stream.
        let mut seen = std::collections::HashSet::new();
        for t in batch.transitions[start..].iter_mut().rev() {
            if seen.insert(t.agent_id) {
                t.done = true;
            }
        }
        batch.episode_returns.push(ep_return);
        batch.episode_wins.push(ep_win);
        episode_id += 1;
    }
    Ok(batch)
}
