use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Gradients, ParamStore, Tape};
use crate::nets::{action_log_prob, entropy, NetworkParams};
use crate::ppo::{normalize_advantages, TrainError, TrajectoryBatch, TrainerConfig};

/// Adaptive-moment optimizer with standard defaults.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let m = store.iter().map(|(_, a)| vec![0.0; a.len()]).collect();
        let v = store.iter().map(|(_, a)| vec![0.0; a.len()]).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m, v }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &[Vec<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (p, (_, value)) in store.iter_mut().enumerate() {
            let g = &grads[p];
            let (m, v) = (&mut self.m[p], &mut self.v[p]);
            for k in 0..g.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                value.data[k] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub policy_grad_norm: f64,
    pub value_grad_norm: f64,
}

fn accumulate(store: &ParamStore, acc: &mut [Vec<f64>], grads: &Gradients, scale: f64) {
    for (p, (name, _)) in store.iter().enumerate() {
        if let Some(g) = grads.get(name) {
            let a = &mut acc[p];
            for k in 0..g.data.len() {
                a[k] += scale * g.data[k];
            }
        }
    }
}

fn clip_global_norm(acc: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for a in acc.iter() {
        for &x in a {
            sq += x * x;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for a in acc.iter_mut() {
            for x in a {
                *x *= s;
            }
        }
    }
    norm
}

/// One PPO update: for each SGD iteration, shuffle the batch into
/// minibatches and take one clipped-surrogate policy step and one value
/// regression step per minibatch. Transitions that share an observation
/// graph share a single forward pass.
pub fn ppo_update(
    policy: &mut NetworkParams,
    value_net: &mut NetworkParams,
    opt_policy: &mut Adam,
    opt_value: &mut Adam,
    batch: &mut TrajectoryBatch,
    config: &TrainerConfig,
    salt: u64,
    value_stats: (f64, f64),
) -> Result<UpdateStats, TrainError> {
    normalize_advantages(batch);
    let n = batch.transitions.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15));

    let mut stats = UpdateStats::default();
    let mut n_minibatches = 0usize;

    for _ in 0..config.sgd_iters {
        // Fisher-Yates shuffle.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(config.minibatch) {
            let mb = chunk.len() as f64;

            // Group minibatch members by shared observation graph,
            // preserving first-seen order for determinism.
            let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
            let mut by_ptr: BTreeMap<usize, usize> = BTreeMap::new();
            for &i in chunk {
                let ptr = std::rc::Rc::as_ptr(&batch.transitions[i].obs) as usize;
                match by_ptr.get(&ptr) {
                    Some(&g) => groups[g].1.push(i),
                    None => {
                        by_ptr.insert(ptr, groups.len());
                        groups.push((i, vec![i]));
                    }
                }
            }

            let mut acc_p: Vec<Vec<f64>> =
                policy.store.iter().map(|(_, a)| vec![0.0; a.len()]).collect();
            let mut acc_v: Vec<Vec<f64>> =
                value_net.store.iter().map(|(_, a)| vec![0.0; a.len()]).collect();

            for (rep, members) in &groups {
                let obs = &batch.transitions[*rep].obs;

                // Policy loss over the group's samples.
                let mut tape = Tape::new();
                let mut binder = policy.binder();
                let emb = policy.forward(&mut tape, &mut binder, obs)?;
                let mut group_loss = None;
                for &i in members {
                    let t = &batch.transitions[i];
                    let heads = policy.policy_heads(
                        &mut tape,
                        &mut binder,
                        &emb,
                        t.agent_node,
                        &t.enemy_nodes,
                        &t.enemy_alive,
                    )?;
                    let lp_new = action_log_prob(&mut tape, &heads, &t.action)?;
                    let lp_diff = tape.add_scalar(lp_new, -t.log_prob)?;
                    let ratio = tape.exp(lp_diff)?;
                    let surr1 = tape.scale(ratio, t.advantage)?;
                    let clipped = tape.clamp(ratio, 1.0 - config.clip, 1.0 + config.clip)?;
                    let surr2 = tape.scale(clipped, t.advantage)?;
                    let surr = tape.min_elem(surr1, surr2)?;
                    let ent = entropy(&mut tape, &heads)?;
                    let ent_term = tape.scale(ent, config.entropy_coef)?;
                    let gain = tape.add(surr, ent_term)?;
                    let loss = tape.scale(gain, -1.0)?;
                    stats.policy_loss += tape.value(loss).data[0] / mb;
                    stats.entropy += tape.value(ent).data[0] / mb;
                    group_loss = Some(match group_loss {
                        None => loss,
                        Some(acc) => tape.add(acc, loss)?,
                    });
                }
                let grads = tape.backward(group_loss.unwrap())?;
                accumulate(&policy.store, &mut acc_p, &grads, 1.0 / mb);

                // Value loss over the same samples.
                let mut vtape = Tape::new();
                let mut vbinder = value_net.binder();
                let vemb = value_net.forward(&mut vtape, &mut vbinder, obs)?;
                let mut vloss = None;
                for &i in members {
                    let t = &batch.transitions[i];
                    let v = value_net.value(&mut vtape, &mut vbinder, &vemb, t.agent_node)?;
                    // Regress toward the normalized return so target
                    // magnitudes stay O(1) regardless of reward scale.
                    let target = (t.ret - value_stats.0) / value_stats.1;
                    let err = vtape.add_scalar(v, -target)?;
                    let sq = vtape.mul(err, err)?;
                    let l = vtape.scale(sq, config.value_coef)?;
                    stats.value_loss += vtape.value(l).data[0] / mb;
                    vloss = Some(match vloss {
                        None => l,
                        Some(acc) => vtape.add(acc, l)?,
                    });
                }
                let vgrads = vtape.backward(vloss.unwrap())?;
                accumulate(&value_net.store, &mut acc_v, &vgrads, 1.0 / mb);
            }

            stats.policy_grad_norm += clip_global_norm(&mut acc_p, config.max_grad_norm);
            stats.value_grad_norm += clip_global_norm(&mut acc_v, config.max_grad_norm);
            opt_policy.step(&mut policy.store, &acc_p);
            opt_value.step(&mut value_net.store, &acc_v);
            n_minibatches += 1;
        }
    }

    let k = n_minibatches.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.policy_grad_norm /= k;
    stats.value_grad_norm /= k;
    Ok(stats)
}
