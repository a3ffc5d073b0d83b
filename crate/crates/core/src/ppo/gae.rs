use std::collections::BTreeMap;

use crate::ppo::TrajectoryBatch;

/// Generalized advantage estimation over contiguous per-agent episode
/// streams: delta_t = r_t + gamma V_{t+1} (1 - done) - V_t, accumulated
/// backwards with factor gamma * lambda. Return targets are A + V.
/// Advantages are left unnormalized here; the updater normalizes per batch.
pub fn compute_gae(batch: &mut TrajectoryBatch, gamma: f64, lambda: f64) {
    let mut streams: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, t) in batch.transitions.iter().enumerate() {
        streams.entry((t.episode_id, t.agent_id)).or_default().push(i);
    }
    for idxs in streams.values() {
        let mut next_adv = 0.0;
        let mut next_value = 0.0;
        for &i in idxs.iter().rev() {
            let t = &batch.transitions[i];
            let not_done = if t.done { 0.0 } else { 1.0 };
            let delta = t.reward + gamma * next_value * not_done - t.value;
            let adv = delta + gamma * lambda * not_done * next_adv;
            next_adv = adv;
            next_value = t.value;
            let t = &mut batch.transitions[i];
            t.advantage = adv;
            t.ret = adv + t.value;
        }
    }
}

/// Normalize advantages to zero mean and unit variance across the batch.
pub fn normalize_advantages(batch: &mut TrajectoryBatch) {
    let n = batch.transitions.len();
    if n == 0 {
        return;
    }
    let mean: f64 = batch.transitions.iter().map(|t| t.advantage).sum::<f64>() / n as f64;
    let var: f64 = batch
        .transitions
        .iter()
        .map(|t| (t.advantage - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt().max(1e-8);
    for t in &mut batch.transitions {
        t.advantage = (t.advantage - mean) / std;
    }
}
