use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::world::{dist, integrate, AgentAction, Entity, StepResult, Team, WorldState};
use crate::envs::{Env, EnvError};

pub const SPREAD_HORIZON: usize = 50;
const BOUND: f64 = 4.0;

/// Cooperative navigation: agents spread out to cover the landmarks, with
/// a shared reward of minus the sum over landmarks of the distance to the
/// closest agent.
#[derive(Debug, Clone)]
pub struct Spread {
    pub n_agents: usize,
    pub n_landmarks: usize,
    state: WorldState,
}

impl Spread {
    pub fn new(n_agents: usize, n_landmarks: usize, seed: u64) -> Result<Self, EnvError> {
        if n_agents == 0 || n_landmarks == 0 {
            return Err(EnvError::Malformed("spread needs at least one agent and landmark".into()));
        }
        let mut env = Spread {
            n_agents,
            n_landmarks,
            state: WorldState { entities: Vec::new(), step: 0 },
        };
        env.reset(seed);
        Ok(env)
    }

    fn reward(&self) -> f64 {
        let agents = self.state.team_indices(Team::Agent);
        let landmarks = self.state.team_indices(Team::Landmark);
        let mut total = 0.0;
        for &l in &landmarks {
            let mut best = f64::INFINITY;
            for &a in &agents {
                let d = dist(self.state.entities[a].pos, self.state.entities[l].pos);
                if d < best {
                    best = d;
                }
            }
            total -= best;
        }
        total
    }
}

impl Env for Spread {
    fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn horizon(&self) -> usize {
        SPREAD_HORIZON
    }

    fn has_modes(&self) -> bool {
        false
    }

    fn n_enemies(&self) -> usize {
        0
    }

    fn state(&self) -> &WorldState {
        &self.state
    }

    fn set_state(&mut self, s: WorldState) {
        self.state = s;
    }

    fn reset(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entities = Vec::with_capacity(self.n_agents + self.n_landmarks);
        for _ in 0..self.n_agents {
            let pos = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            entities.push(Entity::fixed(pos, Team::Agent));
        }
        for _ in 0..self.n_landmarks {
            let pos = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            entities.push(Entity::fixed(pos, Team::Landmark));
        }
        self.state = WorldState { entities, step: 0 };
    }

    fn step(&mut self, actions: &[AgentAction]) -> Result<StepResult, EnvError> {
        if actions.len() != self.n_agents {
            return Err(EnvError::WrongActionCount {
                expected: self.n_agents,
                got: actions.len(),
            });
        }
        for a in actions {
            a.validate()?;
        }
        let agents = self.state.team_indices(Team::Agent);
        for (k, &i) in agents.iter().enumerate() {
            integrate(&mut self.state.entities[i], actions[k].movement, BOUND);
        }
        self.state.step += 1;
        let r = self.reward();
        Ok(StepResult {
            rewards: vec![r; self.n_agents],
            done: self.state.step >= SPREAD_HORIZON,
            win: None,
        })
    }
}
