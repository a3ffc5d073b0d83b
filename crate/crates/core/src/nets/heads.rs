use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{AdError, Array, Binder, Tape, ValueId};
use crate::nets::{Embeddings, NetError, NetworkKind, NetworkParams};

/// Logit value used to mask out invalid discrete choices. Finite so the
/// tape's non-finite detection stays meaningful, but far below any logit a
/// network can produce.
pub const MASKED: f64 = -1.0e30;

pub const MODE_MOVE: usize = 0;
pub const MODE_SHOOT: usize = 1;
pub const MODE_NOOP: usize = 2;

/// Tape handles of the policy distribution parameters for one agent.
#[derive(Debug, Clone, Copy)]
pub struct PolicyOut {
    /// Length-2 movement mean.
    pub mean: ValueId,
    /// Length-2 log standard deviation.
    pub log_sigma: ValueId,
    /// Mode logits with invalid modes masked.
    pub mode_logits: Option<ValueId>,
    /// Per-enemy target logits with dead enemies masked.
    pub target_logits: Option<ValueId>,
}

/// Concrete (detached) action distribution used during rollouts.
#[derive(Debug, Clone)]
pub struct ActionDistribution {
    pub mean: [f64; 2],
    pub sigma: [f64; 2],
    pub mode_logits: Option<Vec<f64>>,
    pub target_logits: Option<Vec<f64>>,
}

/// A sampled joint action in head coordinates: the target is an index into
/// the enemy node list handed to [`NetworkParams::policy_heads`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    pub movement: [f64; 2],
    pub mode: Option<usize>,
    pub target: Option<usize>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

fn log_softmax_at(logits: &[f64], k: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|&l| (l - m).exp()).sum();
    logits[k] - m - z.ln()
}

fn sample_categorical(logits: &[f64], rng: &mut impl Rng) -> usize {
    let p = softmax(logits);
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if r < acc {
            return i;
        }
    }
    p.len() - 1
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

impl ActionDistribution {
    pub fn sample(&self, rng: &mut impl Rng) -> ActionSample {
        let movement = [
            self.mean[0] + self.sigma[0] * rng.sample::<f64, _>(StandardNormal),
            self.mean[1] + self.sigma[1] * rng.sample::<f64, _>(StandardNormal),
        ];
        let mode = self.mode_logits.as_ref().map(|l| sample_categorical(l, rng));
        let target = self.target_logits.as_ref().map(|l| sample_categorical(l, rng));
        ActionSample { movement, mode, target }
    }

    /// Mode of the distribution: mean movement, argmax discrete heads.
    pub fn deterministic(&self) -> ActionSample {
        ActionSample {
            movement: self.mean,
            mode: self.mode_logits.as_ref().map(|l| argmax(l)),
            target: self.target_logits.as_ref().map(|l| argmax(l)),
        }
    }

    /// Joint log-probability: sum of the component log-densities.
    pub fn log_prob(&self, a: &ActionSample) -> f64 {
        let mut lp = 0.0;
        for i in 0..2 {
            let z = (a.movement[i] - self.mean[i]) / self.sigma[i];
            lp += -0.5 * z * z - self.sigma[i].ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        if let (Some(logits), Some(k)) = (self.mode_logits.as_ref(), a.mode) {
            lp += log_softmax_at(logits, k);
        }
        if let (Some(logits), Some(k)) = (self.target_logits.as_ref(), a.target) {
            lp += log_softmax_at(logits, k);
        }
        lp
    }
}

impl NetworkParams {
    /// Policy heads for the deciding agent. `enemies` lists enemy node ids
    /// in a fixed order; `enemy_alive` flags which may be targeted.
    pub fn policy_heads(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        emb: &Embeddings,
        agent: usize,
        enemies: &[usize],
        enemy_alive: &[bool],
    ) -> Result<PolicyOut, NetError> {
        let mean = self.movement_mean(tape, binder, emb, agent)?;
        let log_sigma = binder.get(tape, self.log_sigma)?;

        let any_alive = enemy_alive.iter().any(|&a| a);
        let mut mode_logits = None;
        let mut target_logits = None;

        if self.config.n_modes > 0 {
            let raw = match self.config.kind {
                NetworkKind::Mlp => {
                    self.mode_head.as_ref().unwrap().forward(tape, binder, emb.h)?
                }
                _ => {
                    let row = tape.gather_rows(emb.h, &[agent])?;
                    self.mode_head.as_ref().unwrap().forward(tape, binder, row)?
                }
            };
            let mut flat = tape.sum_axis(raw, 0)?;
            if !any_alive {
                // Shooting needs a living target.
                let mut mask = vec![0.0; self.config.n_modes];
                mask[MODE_SHOOT] = MASKED;
                let mask = tape.constant(Array::vector(mask))?;
                flat = tape.add(flat, mask)?;
            }
            mode_logits = Some(flat);

            if any_alive {
                let raw = match self.config.kind {
                    NetworkKind::Mlp => {
                        if enemies.len() != self.config.mlp_enemies {
                            return Err(NetError::Structural {
                                head: "target_head".into(),
                                detail: format!(
                                    "flat mlp target head is sized for {} enemies, got {}",
                                    self.config.mlp_enemies,
                                    enemies.len()
                                ),
                            });
                        }
                        let t = self.target_head.as_ref().unwrap().forward(tape, binder, emb.h)?;
                        tape.sum_axis(t, 0)?
                    }
                    _ => {
                        let rows = tape.gather_rows(emb.h, enemies)?;
                        let t = self.target_head.as_ref().unwrap().forward(tape, binder, rows)?;
                        tape.sum_axis(t, 1)?
                    }
                };
                let mask: Vec<f64> = enemy_alive
                    .iter()
                    .map(|&a| if a { 0.0 } else { MASKED })
                    .collect();
                let mask = tape.constant(Array::vector(mask))?;
                let masked = tape.add(raw, mask)?;
                target_logits = Some(masked);
            }
        }

        Ok(PolicyOut { mean, log_sigma, mode_logits, target_logits })
    }

    fn movement_mean(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        emb: &Embeddings,
        agent: usize,
    ) -> Result<ValueId, NetError> {
        let id = match self.config.kind {
            NetworkKind::Egnn | NetworkKind::E2gn2 => {
                // The agent's coordinate embedding, first channel, used
                // verbatim: any further map would break equivariance.
                let row = tape.gather_rows(emb.u.unwrap(), &[agent])?;
                let c = self.config.channels;
                let mut sel = vec![0.0; 2 * c * 2];
                sel[0] = 1.0;
                sel[2 + 1] = 1.0;
                let sel = tape.constant(Array { shape: vec![2 * c, 2], data: sel })?;
                let m = tape.matmul(row, sel)?;
                tape.sum_axis(m, 0)?
            }
            NetworkKind::Gnn => {
                let row = tape.gather_rows(emb.h, &[agent])?;
                let m = self.move_head.as_ref().unwrap().forward(tape, binder, row)?;
                tape.sum_axis(m, 0)?
            }
            NetworkKind::Mlp => {
                let m = self.move_head.as_ref().unwrap().forward(tape, binder, emb.h)?;
                tape.sum_axis(m, 0)?
            }
        };
        Ok(id)
    }

    /// Scalar value estimate for the deciding agent.
    pub fn value(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        emb: &Embeddings,
        agent: usize,
    ) -> Result<ValueId, NetError> {
        let row = match self.config.kind {
            NetworkKind::Mlp => emb.h,
            _ => tape.gather_rows(emb.h, &[agent])?,
        };
        let v = self.value_head.forward(tape, binder, row)?;
        Ok(tape.sum_all(v)?)
    }

    /// Detach the policy heads into a concrete sampling distribution.
    pub fn distribution(&self, tape: &Tape, out: &PolicyOut) -> ActionDistribution {
        let mean_v = tape.value(out.mean);
        let ls = tape.value(out.log_sigma);
        ActionDistribution {
            mean: [mean_v.data[0], mean_v.data[1]],
            sigma: [ls.data[0].exp(), ls.data[1].exp()],
            mode_logits: out.mode_logits.map(|id| tape.value(id).data.clone()),
            target_logits: out.target_logits.map(|id| tape.value(id).data.clone()),
        }
    }
}

/// Differentiable joint log-probability of `action` under the policy heads.
pub fn action_log_prob(
    tape: &mut Tape,
    out: &PolicyOut,
    action: &ActionSample,
) -> Result<ValueId, AdError> {
    // Gaussian movement component.
    let a = tape.constant(Array::vector(action.movement.to_vec()))?;
    let diff = tape.sub(a, out.mean)?;
    let neg_ls = tape.scale(out.log_sigma, -1.0)?;
    let inv_sigma = tape.exp(neg_ls)?;
    let z = tape.mul(diff, inv_sigma)?;
    let sq = tape.sqnorm(z)?;
    let quad = tape.scale(sq, -0.5)?;
    let ls_sum = tape.sum_all(out.log_sigma)?;
    let neg_ls_sum = tape.scale(ls_sum, -1.0)?;
    let mut lp = tape.add(quad, neg_ls_sum)?;
    lp = tape.add_scalar(lp, -(2.0 * std::f64::consts::PI).ln())?;

    if let (Some(logits), Some(k)) = (out.mode_logits, action.mode) {
        let chosen = tape.index_scalar(logits, k)?;
        let lse = tape.logsumexp_rows(logits)?;
        let part = tape.sub(chosen, lse)?;
        lp = tape.add(lp, part)?;
    }
    if let (Some(logits), Some(k)) = (out.target_logits, action.target) {
        let chosen = tape.index_scalar(logits, k)?;
        let lse = tape.logsumexp_rows(logits)?;
        let part = tape.sub(chosen, lse)?;
        lp = tape.add(lp, part)?;
    }
    Ok(lp)
}

/// Differentiable entropy of the joint distribution (sum of components).
pub fn entropy(tape: &mut Tape, out: &PolicyOut) -> Result<ValueId, AdError> {
    // Gaussian: sum(log sigma) + n/2 (1 + ln 2 pi).
    let ls_sum = tape.sum_all(out.log_sigma)?;
    let mut h = tape.add_scalar(ls_sum, 1.0 + (2.0 * std::f64::consts::PI).ln())?;
    for logits in [out.mode_logits, out.target_logits].into_iter().flatten() {
        let p = tape.softmax_rows(logits)?;
        let dot = tape.mul(p, logits)?;
        let dot = tape.sum_all(dot)?;
        let lse = tape.logsumexp_rows(logits)?;
        let part = tape.sub(lse, dot)?;
        h = tape.add(h, part)?;
    }
    Ok(h)
}
