use rand::Rng;

use crate::envs::{EnvError, WorldState};

/// A 2x2 orthogonal matrix applied to every positional and velocity
/// quantity of a world about the map center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryTransform {
    pub m: [[f64; 2]; 2],
}

impl SymmetryTransform {
    pub fn new(m: [[f64; 2]; 2]) -> Result<Self, EnvError> {
        let t = SymmetryTransform { m };
        // T^T T = I within 1e-12.
        let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
        let c0 = [m[0][0], m[1][0]];
        let c1 = [m[0][1], m[1][1]];
        if (dot(c0, c0) - 1.0).abs() > 1e-12
            || (dot(c1, c1) - 1.0).abs() > 1e-12
            || dot(c0, c1).abs() > 1e-12
        {
            return Err(EnvError::NonOrthogonal(format!("{:?}", m)));
        }
        Ok(t)
    }

    pub fn identity() -> Self {
        SymmetryTransform { m: [[1.0, 0.0], [0.0, 1.0]] }
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        SymmetryTransform { m: [[c, -s], [s, c]] }
    }

    /// Reflection about the line through the origin at angle `theta`.
    pub fn reflection(theta: f64) -> Self {
        let (s, c) = (2.0 * theta).sin_cos();
        SymmetryTransform { m: [[c, s], [s, -c]] }
    }

    /// Reflection across the y axis (x -> -x).
    pub fn mirror_x() -> Self {
        SymmetryTransform { m: [[-1.0, 0.0], [0.0, 1.0]] }
    }

    pub fn random_rotation(rng: &mut impl Rng) -> Self {
        Self::rotation(rng.gen_range(0.0..std::f64::consts::TAU))
    }

    pub fn random_reflection(rng: &mut impl Rng) -> Self {
        Self::reflection(rng.gen_range(0.0..std::f64::consts::TAU))
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn transpose(&self) -> Self {
        SymmetryTransform {
            m: [[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]],
        }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.m
    }
}

/// Map every position and velocity of `state` through `t`. Invariant
/// quantities (health, flags, step counter) are untouched.
pub fn apply_symmetry(state: &WorldState, t: &SymmetryTransform) -> WorldState {
    let mut s = state.clone();
    for e in &mut s.entities {
        e.pos = t.apply(e.pos);
        e.vel = t.apply(e.vel);
    }
    s
}
