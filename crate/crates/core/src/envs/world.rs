use crate::envs::EnvError;

pub const DT: f64 = 0.1;
pub const DAMPING: f64 = 0.25;
pub const MAX_SPEED: f64 = 1.0;
pub const MAX_THRUST: f64 = 1.0;
/// Control gain applied to thrust commands before integration. With the
/// damping above this gives a terminal speed of MAX_SPEED and roughly
/// 0.1 length units of travel per step at full throttle, so an agent
/// can cross the arena within an episode.
pub const SENSITIVITY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Team {
    Agent,
    Landmark,
    Evader,
    Enemy,
}

impl Team {
    pub fn one_hot(self) -> [f64; 4] {
        match self {
            Team::Agent => [1.0, 0.0, 0.0, 0.0],
            Team::Landmark => [0.0, 1.0, 0.0, 0.0],
            Team::Evader => [0.0, 0.0, 1.0, 0.0],
            Team::Enemy => [0.0, 0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub team: Team,
    pub health: f64,
    pub max_health: f64,
    pub alive: bool,
    pub unit_type: usize,
}

impl Entity {
    pub fn fixed(pos: [f64; 2], team: Team) -> Self {
        Entity {
            pos,
            vel: [0.0, 0.0],
            team,
            health: 1.0,
            max_health: 1.0,
            alive: true,
            unit_type: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub entities: Vec<Entity>,
    pub step: usize,
}

impl WorldState {
    pub fn team_indices(&self, team: Team) -> Vec<usize> {
        self.entities
            .iter()
            .enumerate()
            .filter(|(_, e)| e.team == team)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn living(&self, team: Team) -> usize {
        self.entities
            .iter()
            .filter(|e| e.team == team && e.alive)
            .count()
    }
}

/// Continuous movement command plus the optional discrete components of
/// the mixed action space. `target` indexes the enemy list in env order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentAction {
    pub movement: [f64; 2],
    pub mode: Option<usize>,
    pub target: Option<usize>,
}

impl AgentAction {
    pub fn movement(movement: [f64; 2]) -> Self {
        AgentAction { movement, mode: None, target: None }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !self.movement[0].is_finite() || !self.movement[1].is_finite() {
            return Err(EnvError::Malformed("non-finite movement command".into()));
        }
        Ok(())
    }
}

pub fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm([a[0] - b[0], a[1] - b[1]])
}

pub fn clip_norm(v: [f64; 2], max: f64) -> [f64; 2] {
    let n = norm(v);
    if n > max {
        [v[0] * max / n, v[1] * max / n]
    } else {
        v
    }
}

/// Double-integrator update shared by every environment.
pub fn integrate(e: &mut Entity, accel: [f64; 2], bound: f64) {
    let a = clip_norm(accel, MAX_THRUST);
    e.vel[0] = (1.0 - DAMPING) * e.vel[0] + a[0] * SENSITIVITY * DT;
    e.vel[1] = (1.0 - DAMPING) * e.vel[1] + a[1] * SENSITIVITY * DT;
    e.vel = clip_norm(e.vel, MAX_SPEED);
    e.pos[0] += e.vel[0] * DT;
    e.pos[1] += e.vel[1] * DT;
    // Radial clamp about the map center; unlike a box clamp it commutes
    // with rotations and reflections.
    let r = norm(e.pos);
    if r > bound {
        let rad = [e.pos[0] / r, e.pos[1] / r];
        e.pos = [rad[0] * bound, rad[1] * bound];
        let outward = e.vel[0] * rad[0] + e.vel[1] * rad[1];
        if outward > 0.0 {
            e.vel[0] -= outward * rad[0];
            e.vel[1] -= outward * rad[1];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub rewards: Vec<f64>,
    pub done: bool,
    pub win: Option<bool>,
}
