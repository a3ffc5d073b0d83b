use crate::envs::world::{norm, Team, WorldState};
use crate::envs::EnvError;
use crate::nets::{GraphNode, GraphState};

/// Invariant feature layout: team one-hot (4), unit-type one-hot (3),
/// health fraction, alive flag, speed.
pub const H_DIM: usize = 10;
/// Coordinate channels: recentered position, velocity.
pub const CHANNELS: usize = 2;

fn node_features(state: &WorldState, i: usize) -> GraphNode {
    let e = &state.entities[i];
    let mut h = Vec::with_capacity(H_DIM);
    h.extend_from_slice(&e.team.one_hot());
    let mut ty = [0.0; 3];
    ty[e.unit_type.min(2)] = 1.0;
    h.extend_from_slice(&ty);
    h.push(if e.max_health > 0.0 { e.health / e.max_health } else { 0.0 });
    h.push(if e.alive { 1.0 } else { 0.0 });
    h.push(norm(e.vel));
    GraphNode { h, coords: vec![e.pos, e.vel] }
}

/// Build the shared full-observability observation graph: one node per
/// entity, positions recentered at the map center (the origin), agents
/// fully connected plus agent edges to every non-agent entity.
pub fn build_graph(state: &WorldState) -> Result<GraphState, EnvError> {
    let n = state.entities.len();
    let nodes: Vec<GraphNode> = (0..n).map(|i| node_features(state, i)).collect();
    let is_agent: Vec<bool> = state.entities.iter().map(|e| e.team == Team::Agent).collect();
    let mut edges = Vec::new();
    for d in 0..n {
        for s in 0..n {
            if d == s {
                continue;
            }
            // Agents see everything; other entities see the agents.
            if is_agent[d] || is_agent[s] {
                edges.push((d, s));
            }
        }
    }
    Ok(GraphState::new(nodes, edges)?)
}

/// Spec surface: observation for one deciding agent. The graph content is
/// shared under full observability, but a dead agent has no observation.
pub fn observe_graph(state: &WorldState, agent: usize) -> Result<GraphState, EnvError> {
    let idx = state.team_indices(Team::Agent);
    let &node = idx.get(agent).ok_or(EnvError::Malformed(format!(
        "agent {} of {}",
        agent,
        idx.len()
    )))?;
    if !state.entities[node].alive {
        return Err(EnvError::DeadAgent(agent));
    }
    build_graph(state)
}
