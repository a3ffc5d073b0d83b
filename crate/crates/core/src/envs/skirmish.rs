use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::world::{
    dist, integrate, norm, AgentAction, Entity, StepResult, Team, WorldState,
};
use crate::envs::{Env, EnvError, SymmetryTransform};
use crate::nets::{MODE_MOVE, MODE_SHOOT};

pub const SKIRMISH_HORIZON: usize = 100;
pub const MAP_RADIUS: f64 = 4.0;
pub const SPAWN_RADIUS: f64 = 3.0;
pub const ATTACK_RANGE: f64 = 0.8;
pub const DAMAGE: f64 = 10.0;
/// Hit points per unit type: marine-like, tank-like, fast-type.
pub const UNIT_HP: [f64; 3] = [30.0, 45.0, 20.0];
const ENEMY_THRUST: f64 = 1.0;
/// Enemies advance on the nearest ally but stand off outside attack
/// range; closing the final stretch is the allies' job, so a policy
/// that never moves toward the enemy line never engages at all.
const STANDOFF: f64 = 1.2;
/// Enemies only attack every third step in range, so allies that do
/// engage win a sustained exchange on damage throughput.
const ENEMY_ATTACK_PERIOD: usize = 3;
/// Potential-based shaping weight on the mean ally distance to the
/// nearest living enemy. The telescoping sum rewards closing in without
/// changing which policies are optimal, and distances are invariant
/// under rotations and reflections.
const APPROACH_COEF: f64 = 1.0;

/// Which half-plane the enemy spawn ring covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    Left,
    Right,
    All,
}

impl InitScheme {
    pub fn parse(s: &str) -> Result<Self, EnvError> {
        match s {
            "left" => Ok(InitScheme::Left),
            "right" => Ok(InitScheme::Right),
            "all" => Ok(InitScheme::All),
            other => Err(EnvError::UnknownScheme(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InitScheme::Left => "left",
            InitScheme::Right => "right",
            InitScheme::All => "all",
        }
    }
}

/// Mixed-action team skirmish: allies under policy control fight scripted
/// enemies that advance on the nearest living ally and attack in range.
/// Enemies spawn on a ring in a scheme-dependent direction family.
#[derive(Debug, Clone)]
pub struct Skirmish {
    pub n_allies: usize,
    pub n_enemies: usize,
    pub scheme: InitScheme,
    state: WorldState,
    total_enemy_hp: f64,
}

impl Skirmish {
    pub fn new(
        n_allies: usize,
        n_enemies: usize,
        scheme: InitScheme,
        seed: u64,
    ) -> Result<Self, EnvError> {
        if n_allies == 0 || n_enemies == 0 {
            return Err(EnvError::Malformed("skirmish needs units on both sides".into()));
        }
        let mut env = Skirmish {
            n_allies,
            n_enemies,
            scheme,
            state: WorldState { entities: Vec::new(), step: 0 },
            total_enemy_hp: 0.0,
        };
        env.reset(seed);
        Ok(env)
    }

    fn typed(pos: [f64; 2], team: Team, unit_type: usize) -> Entity {
        let hp = UNIT_HP[unit_type];
        Entity {
            pos,
            vel: [0.0, 0.0],
            team,
            health: hp,
            max_health: hp,
            alive: true,
            unit_type,
        }
    }

    pub fn living_ally_indices(&self) -> Vec<usize> {
        self.state
            .entities
            .iter()
            .enumerate()
            .filter(|(_, e)| e.team == Team::Agent && e.alive)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn win(&self) -> bool {
        self.state.living(Team::Enemy) == 0
    }

    /// Shaping potential: negative mean distance from living allies to
    /// their nearest living enemy. Zero when either side is wiped out.
    fn potential(&self) -> f64 {
        let enemies: Vec<usize> = self
            .state
            .team_indices(Team::Enemy)
            .into_iter()
            .filter(|&e| self.state.entities[e].alive)
            .collect();
        let allies = self.living_ally_indices();
        if enemies.is_empty() || allies.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for &a in &allies {
            let mut best = f64::INFINITY;
            for &e in &enemies {
                let d = dist(self.state.entities[a].pos, self.state.entities[e].pos);
                if d < best {
                    best = d;
                }
            }
            total += best;
        }
        -APPROACH_COEF * total / allies.len() as f64
    }
}

impl Env for Skirmish {
    fn n_agents(&self) -> usize {
        self.n_allies
    }

    fn horizon(&self) -> usize {
        SKIRMISH_HORIZON
    }

    fn has_modes(&self) -> bool {
        true
    }

    fn n_enemies(&self) -> usize {
        self.n_enemies
    }

    fn state(&self) -> &WorldState {
        &self.state
    }

    fn set_state(&mut self, s: WorldState) {
        self.state = s;
        self.total_enemy_hp = self
            .state
            .entities
            .iter()
            .filter(|e| e.team == Team::Enemy)
            .map(|e| e.max_health)
            .sum();
    }

    fn reset(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Unit types first, then layout, so matched seeds share armies
        // across schemes.
        let ally_types: Vec<usize> = (0..self.n_allies).map(|_| rng.gen_range(0..3)).collect();
        let enemy_types: Vec<usize> = (0..self.n_enemies).map(|_| rng.gen_range(0..3)).collect();

        let mut entities = Vec::with_capacity(self.n_allies + self.n_enemies);
        for &t in &ally_types {
            let pos = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            entities.push(Self::typed(pos, Team::Agent, t));
        }
        for &t in &enemy_types {
            // Left half-plane angles; the right scheme is its exact
            // x-reflection under a matched seed.
            let half = std::f64::consts::PI;
            let theta = rng.gen_range(0.0..half);
            let pos = match self.scheme {
                InitScheme::Left | InitScheme::Right => {
                    let a = half / 2.0 + theta; // (pi/2, 3pi/2)
                    [SPAWN_RADIUS * a.cos(), SPAWN_RADIUS * a.sin()]
                }
                InitScheme::All => {
                    let a = 2.0 * theta;
                    [SPAWN_RADIUS * a.cos(), SPAWN_RADIUS * a.sin()]
                }
            };
            entities.push(Self::typed(pos, Team::Enemy, t));
        }
        let mut state = WorldState { entities, step: 0 };
        if self.scheme == InitScheme::Right {
            state = crate::envs::apply_symmetry(&state, &SymmetryTransform::mirror_x());
        }
        self.total_enemy_hp = state
            .entities
            .iter()
            .filter(|e| e.team == Team::Enemy)
            .map(|e| e.max_health)
            .sum();
        self.state = state;
    }

    fn step(&mut self, actions: &[AgentAction]) -> Result<StepResult, EnvError> {
        let allies = self.living_ally_indices();
        if actions.len() != allies.len() {
            return Err(EnvError::WrongActionCount {
                expected: allies.len(),
                got: actions.len(),
            });
        }
        let enemies = self.state.team_indices(Team::Enemy);
        let mut damage_dealt = 0.0;
        let phi_before = self.potential();

        // Ally phase: movement or shooting, then kills land before the
        // enemy phase so dead enemies deal no damage.
        for (k, &i) in allies.iter().enumerate() {
            let a = &actions[k];
            a.validate()?;
            let mode = a.mode.ok_or_else(|| {
                EnvError::Malformed("skirmish actions need a mode".into())
            })?;
            let mut accel = [0.0, 0.0];
            if mode == MODE_SHOOT {
                if let Some(tidx) = a.target {
                    if tidx >= enemies.len() {
                        return Err(EnvError::Malformed(format!(
                            "target {} of {} enemies",
                            tidx,
                            enemies.len()
                        )));
                    }
                    let t = enemies[tidx];
                    if self.state.entities[t].alive {
                        let d = dist(self.state.entities[i].pos, self.state.entities[t].pos);
                        if d <= ATTACK_RANGE {
                            let hit = DAMAGE.min(self.state.entities[t].health);
                            self.state.entities[t].health -= hit;
                            damage_dealt += hit;
                            if self.state.entities[t].health <= 0.0 {
                                self.state.entities[t].alive = false;
                                self.state.entities[t].vel = [0.0, 0.0];
                            }
                        }
                    }
                }
            } else if mode == MODE_MOVE {
                accel = a.movement;
            }
            integrate(&mut self.state.entities[i], accel, MAP_RADIUS);
        }

        // Enemy phase: advance on the nearest living ally, attack in range.
        for &e in &enemies {
            if !self.state.entities[e].alive {
                continue;
            }
            let e_pos = self.state.entities[e].pos;
            let mut best: Option<(usize, f64)> = None;
            for &a in &self.state.team_indices(Team::Agent) {
                if !self.state.entities[a].alive {
                    continue;
                }
                let d = dist(e_pos, self.state.entities[a].pos);
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((a, d));
                }
            }
            let Some((tgt, d)) = best else { continue };
            let mut accel = [0.0, 0.0];
            if d <= ATTACK_RANGE {
                if self.state.step % ENEMY_ATTACK_PERIOD == 0 {
                    let hit = DAMAGE.min(self.state.entities[tgt].health);
                    self.state.entities[tgt].health -= hit;
                    if self.state.entities[tgt].health <= 0.0 {
                        self.state.entities[tgt].alive = false;
                        self.state.entities[tgt].vel = [0.0, 0.0];
                    }
                }
            } else if d > STANDOFF {
                let delta = [
                    self.state.entities[tgt].pos[0] - e_pos[0],
                    self.state.entities[tgt].pos[1] - e_pos[1],
                ];
                let n = norm(delta);
                accel = [delta[0] / n * ENEMY_THRUST, delta[1] / n * ENEMY_THRUST];
            }
            integrate(&mut self.state.entities[e], accel, MAP_RADIUS);
        }

        self.state.step += 1;
        let win = self.win();
        let lost = self.state.living(Team::Agent) == 0;
        let mut reward = damage_dealt / self.total_enemy_hp;
        if win {
            reward += 1.0;
        } else if !lost {
            reward += self.potential() - phi_before;
        }
        let done = win || lost || self.state.step >= SKIRMISH_HORIZON;
        Ok(StepResult {
            rewards: vec![reward; actions.len()],
            done,
            win: Some(win),
        })
    }
}
