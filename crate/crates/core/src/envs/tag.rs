use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::world::{
    dist, integrate, norm, AgentAction, Entity, StepResult, Team, WorldState, MAX_THRUST,
};
use crate::envs::{Env, EnvError};

pub const TAG_HORIZON: usize = 50;
pub const CONTACT_RADIUS: f64 = 0.15;
const BOUND: f64 = 2.0;

/// Predator-prey: pursuers chase a scripted evader that accelerates away
/// from the summed pursuer directions, holding position on a tie.
#[derive(Debug, Clone)]
pub struct Tag {
    pub n_pursuers: usize,
    state: WorldState,
}

impl Tag {
    pub fn new(n_pursuers: usize, seed: u64) -> Result<Self, EnvError> {
        if n_pursuers == 0 {
            return Err(EnvError::Malformed("tag needs at least one pursuer".into()));
        }
        let mut env = Tag {
            n_pursuers,
            state: WorldState { entities: Vec::new(), step: 0 },
        };
        env.reset(seed);
        Ok(env)
    }

    /// Evader heuristic: accelerate along the negated sum of unit vectors
    /// from itself to each pursuer; exact cancellation means stay put.
    pub fn evader_accel(state: &WorldState) -> [f64; 2] {
        let evader = state.team_indices(Team::Evader)[0];
        let e_pos = state.entities[evader].pos;
        let mut dir = [0.0, 0.0];
        for &p in &state.team_indices(Team::Agent) {
            let d = [state.entities[p].pos[0] - e_pos[0], state.entities[p].pos[1] - e_pos[1]];
            let n = norm(d);
            if n > 1e-12 {
                dir[0] -= d[0] / n;
                dir[1] -= d[1] / n;
            }
        }
        let n = norm(dir);
        if n < 1e-9 {
            [0.0, 0.0]
        } else {
            [dir[0] / n * MAX_THRUST, dir[1] / n * MAX_THRUST]
        }
    }
}

impl Env for Tag {
    fn n_agents(&self) -> usize {
        self.n_pursuers
    }

    fn horizon(&self) -> usize {
        TAG_HORIZON
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
        let mut entities = Vec::with_capacity(self.n_pursuers + 1);
        for _ in 0..self.n_pursuers {
            let pos = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            entities.push(Entity::fixed(pos, Team::Agent));
        }
        let pos = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        entities.push(Entity::fixed(pos, Team::Evader));
        self.state = WorldState { entities, step: 0 };
    }

    fn step(&mut self, actions: &[AgentAction]) -> Result<StepResult, EnvError> {
        if actions.len() != self.n_pursuers {
            return Err(EnvError::WrongActionCount {
                expected: self.n_pursuers,
                got: actions.len(),
            });
        }
        for a in actions {
            a.validate()?;
        }
        let evader_a = Self::evader_accel(&self.state);
        let pursuers = self.state.team_indices(Team::Agent);
        for (k, &i) in pursuers.iter().enumerate() {
            integrate(&mut self.state.entities[i], actions[k].movement, BOUND);
        }
        let evader = self.state.team_indices(Team::Evader)[0];
        integrate(&mut self.state.entities[evader], evader_a, BOUND);

        let e_pos = self.state.entities[evader].pos;
        let mut reward = 0.0;
        let mut nearest = f64::INFINITY;
        for &p in &pursuers {
            let d = dist(self.state.entities[p].pos, e_pos);
            if d < CONTACT_RADIUS {
                reward += 10.0;
            }
            if d < nearest {
                nearest = d;
            }
        }
        reward -= 0.1 * nearest;

        self.state.step += 1;
        Ok(StepResult {
            rewards: vec![reward; self.n_pursuers],
            done: self.state.step >= TAG_HORIZON,
            win: None,
        })
    }
}
