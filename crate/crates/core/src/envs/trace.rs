use std::fmt::Write as _;

use crate::envs::world::{AgentAction, WorldState};

/// One exported trace row per entity per step.
pub struct TraceWriter {
    buf: String,
}

impl TraceWriter {
    pub fn new() -> Self {
        let mut buf = String::new();
        buf.push_str("step,entity,x,y,health,move_x,move_y,mode,target,reward\n");
        TraceWriter { buf }
    }

    pub fn record(&mut self, state: &WorldState, actions: &[Option<AgentAction>], rewards: &[Option<f64>]) {
        for (i, e) in state.entities.iter().enumerate() {
            let (mx, my, mode, target) = match actions.get(i).copied().flatten() {
                Some(a) => (
                    a.movement[0].to_string(),
                    a.movement[1].to_string(),
                    a.mode.map(|m| m.to_string()).unwrap_or_default(),
                    a.target.map(|t| t.to_string()).unwrap_or_default(),
                ),
                None => (String::new(), String::new(), String::new(), String::new()),
            };
            let reward = rewards
                .get(i)
                .copied()
                .flatten()
                .map(|r| r.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                self.buf,
                "{},{},{},{},{},{},{},{},{},{}",
                state.step, i, e.pos[0], e.pos[1], e.health, mx, my, mode, target, reward
            );
        }
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

impl Default for TraceWriter {
    fn default() -> Self {
        Self::new()
    }
}
