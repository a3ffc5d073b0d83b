use std::rc::Rc;

use e2gn2_core::autodiff::Tape;
use e2gn2_core::nets::{
    ActionSample, GraphNode, GraphState, NetworkKind, NetworkParams,
};
use e2gn2_core::ppo::{
    collect_rollouts, compute_gae, normalize_advantages, ppo_update, to_env_action, Adam, EnvSpec,
    TrainerConfig, TrajectoryBatch, Transition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dummy_graph() -> Rc<GraphState> {
    let nodes = vec![
        GraphNode { h: vec![1.0; 10], coords: vec![[0.1, 0.2], [0.0, 0.0]] },
        GraphNode { h: vec![0.5; 10], coords: vec![[-0.3, 0.4], [0.0, 0.0]] },
    ];
    Rc::new(GraphState::new(nodes, GraphState::fully_connected_edges(2)).unwrap())
}

/// Build a batch with explicit (reward, value, done) streams. All
/// transitions belong to one agent of one episode unless ids are given.
fn synthetic_batch(steps: &[(f64, f64, bool)]) -> TrajectoryBatch {
    let g = dummy_graph();
    let mut batch = TrajectoryBatch::default();
    for &(reward, value, done) in steps {
        batch.transitions.push(Transition {
            obs: Rc::clone(&g),
            agent_node: 0,
            enemy_nodes: Rc::new(Vec::new()),
            enemy_alive: Vec::new(),
            action: ActionSample { movement: [0.0, 0.0], mode: None, target: None },
            log_prob: 0.0,
            reward,
            value,
            advantage: 0.0,
            ret: 0.0,
            done,
            agent_id: 0,
            episode_id: 0,
        });
    }
    batch.episode_returns.push(steps.iter().map(|s| s.0).sum());
    batch.episode_wins.push(None);
    batch
}

// ---------------------------------------------------------------------------
// Generalized advantage estimation
// ---------------------------------------------------------------------------

#[test]
fn lambda_zero_reduces_to_one_step_td_errors() {
    let steps = [(1.0, 0.3, false), (-0.5, 0.7, false), (2.0, -0.2, true)];
    let mut batch = synthetic_batch(&steps);
    let gamma = 0.9;
    compute_gae(&mut batch, gamma, 0.0);
    let deltas = [
        1.0 + gamma * 0.7 - 0.3,
        -0.5 + gamma * (-0.2) - 0.7,
        2.0 - (-0.2),
    ];
    for (t, want) in batch.transitions.iter().zip(deltas) {
        assert!((t.advantage - want).abs() < 1e-14);
        assert!((t.ret - (want + t.value)).abs() < 1e-14);
    }
}

#[test]
fn single_step_episode_advantage_is_reward_minus_value() {
    let mut batch = synthetic_batch(&[(3.0, 1.25, true)]);
    compute_gae(&mut batch, 0.99, 0.95);
    assert!((batch.transitions[0].advantage - (3.0 - 1.25)).abs() < 1e-14);
    assert!((batch.transitions[0].ret - 3.0).abs() < 1e-14);
}

/// Direct truncated-sum oracle: A_t = sum_k (gamma lambda)^k delta_{t+k}
/// within the episode.
fn gae_oracle(steps: &[(f64, f64, bool)], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = steps.len();
    let mut deltas = vec![0.0; n];
    for t in 0..n {
        let (r, v, done) = steps[t];
        let next_v = if done || t + 1 == n { 0.0 } else { steps[t + 1].1 };
        deltas[t] = r + gamma * next_v - v;
    }
    let mut out = vec![0.0; n];
    for t in 0..n {
        let mut acc = 0.0;
        let mut w = 1.0;
        for k in t..n {
            acc += w * deltas[k];
            if steps[k].2 {
                break;
            }
            w *= gamma * lambda;
        }
        out[t] = acc;
    }
    out
}

#[test]
fn gae_matches_the_truncated_sum_oracle_on_random_episodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let len = rng.gen_range(1..30);
        let steps: Vec<(f64, f64, bool)> = (0..len)
            .map(|t| {
                (
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-1.0..1.0),
                    t == len - 1,
                )
            })
            .collect();
        let gamma = rng.gen_range(0.8..1.0);
        let lambda = rng.gen_range(0.0..1.0);
        let mut batch = synthetic_batch(&steps);
        compute_gae(&mut batch, gamma, lambda);
        let want = gae_oracle(&steps, gamma, lambda);
        for (t, w) in batch.transitions.iter().zip(want) {
            assert!((t.advantage - w).abs() < 1e-10, "{} vs {}", t.advantage, w);
        }
    }
}

#[test]
fn interleaved_agent_streams_are_estimated_independently() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let len = 12;
    let a: Vec<(f64, f64, bool)> = (0..len)
        .map(|t| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), t == len - 1))
        .collect();
    let b: Vec<(f64, f64, bool)> = (0..len)
        .map(|t| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), t == len - 1))
        .collect();

    // Interleave the two streams as two agents of one episode.
    let g = dummy_graph();
    let mut batch = TrajectoryBatch::default();
    for t in 0..len {
        for (agent_id, stream) in [(0usize, &a), (1usize, &b)] {
            let (reward, value, done) = stream[t];
            batch.transitions.push(Transition {
                obs: Rc::clone(&g),
                agent_node: agent_id,
                enemy_nodes: Rc::new(Vec::new()),
                enemy_alive: Vec::new(),
                action: ActionSample { movement: [0.0, 0.0], mode: None, target: None },
                log_prob: 0.0,
                reward,
                value,
                advantage: 0.0,
                ret: 0.0,
                done,
                agent_id,
                episode_id: 0,
            });
        }
    }
    compute_gae(&mut batch, 0.99, 0.95);
    let want_a = gae_oracle(&a, 0.99, 0.95);
    let want_b = gae_oracle(&b, 0.99, 0.95);
    for t in 0..len {
        assert!((batch.transitions[2 * t].advantage - want_a[t]).abs() < 1e-12);
        assert!((batch.transitions[2 * t + 1].advantage - want_b[t]).abs() < 1e-12);
    }
}

#[test]
fn done_flags_stop_bootstrapping_across_episodes() {
    // Two back-to-back episodes in one stream: the second must not leak
    // value into the first.
    let steps = [(1.0, 0.5, false), (0.0, 0.5, true), (100.0, 50.0, false), (0.0, 10.0, true)];
    let g = dummy_graph();
    let mut batch = TrajectoryBatch::default();
    for (i, &(reward, value, done)) in steps.iter().enumerate() {
        batch.transitions.push(Transition {
            obs: Rc::clone(&g),
            agent_node: 0,
            enemy_nodes: Rc::new(Vec::new()),
            enemy_alive: Vec::new(),
            action: ActionSample { movement: [0.0, 0.0], mode: None, target: None },
            log_prob: 0.0,
            reward,
            value,
            advantage: 0.0,
            ret: 0.0,
            done,
            agent_id: 0,
            episode_id: i / 2,
        });
    }
    compute_gae(&mut batch, 1.0, 1.0);
    // First episode sees only its own rewards.
    assert!((batch.transitions[0].advantage - (1.0 + 0.0 - 0.5 - 0.5 + 0.5)).abs() < 1e-12);
    assert!((batch.transitions[1].advantage - (0.0 - 0.5)).abs() < 1e-12);
}

#[test]
fn normalized_advantages_have_zero_mean_and_unit_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let steps: Vec<(f64, f64, bool)> = (0..50)
        .map(|t| (rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0), t == 49))
        .collect();
    let mut batch = synthetic_batch(&steps);
    compute_gae(&mut batch, 0.99, 0.95);
    normalize_advantages(&mut batch);
    let n = batch.len() as f64;
    let mean: f64 = batch.transitions.iter().map(|t| t.advantage).sum::<f64>() / n;
    let var: f64 = batch.transitions.iter().map(|t| t.advantage * t.advantage).sum::<f64>() / n;
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-9);
}

// ---------------------------------------------------------------------------
// Rollout collection
// ---------------------------------------------------------------------------

fn small_trainer(batch: usize, minibatch: usize, seed: u64) -> TrainerConfig {
    let mut c = TrainerConfig::mpe();
    c.train_batch = batch;
    c.minibatch = minibatch;
    c.seed = seed;
    c
}

fn collect(
    spec: &EnvSpec,
    kind: NetworkKind,
    config: &TrainerConfig,
) -> (NetworkParams, NetworkParams, TrajectoryBatch) {
    let policy = NetworkParams::init(spec.net_config(kind), config.seed).unwrap();
    let value_net = NetworkParams::init(spec.net_config(kind), config.seed + 1).unwrap();
    let mut factory = |seed: u64| spec.make(seed);
    let batch =
        collect_rollouts(&policy, &value_net, &mut factory, config, 0, (0.0, 1.0)).unwrap();
    (policy, value_net, batch)
}

#[test]
fn rollouts_contain_only_complete_episodes() {
    let spec = EnvSpec::spread(1, 1);
    let config = small_trainer(2000, 1000, 3);
    let (_, _, batch) = collect(&spec, NetworkKind::Egnn, &config);
    assert!(batch.len() >= 2000);
    assert!(batch.n_episodes() >= 40);
    // Every episode stream ends with a done-marked transition, and the
    // last transition of each stream is the only done one for spread.
    let mut per_stream: std::collections::BTreeMap<(usize, usize), Vec<bool>> =
        std::collections::BTreeMap::new();
    for t in &batch.transitions {
        per_stream.entry((t.episode_id, t.agent_id)).or_default().push(t.done);
    }
    for (stream, dones) in per_stream {
        assert_eq!(dones.iter().filter(|&&d| d).count(), 1, "stream {:?}", stream);
        assert!(*dones.last().unwrap());
    }
}

#[test]
fn rollouts_are_reproducible_under_a_fixed_seed() {
    let spec = EnvSpec::tag(2);
    let config = small_trainer(300, 100, 17);
    let (_, _, a) = collect(&spec, NetworkKind::E2gn2, &config);
    let (_, _, b) = collect(&spec, NetworkKind::E2gn2, &config);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.transitions.iter().zip(&b.transitions) {
        assert_eq!(x.action.movement[0].to_bits(), y.action.movement[0].to_bits());
        assert_eq!(x.action.movement[1].to_bits(), y.action.movement[1].to_bits());
        assert_eq!(x.log_prob.to_bits(), y.log_prob.to_bits());
        assert_eq!(x.reward.to_bits(), y.reward.to_bits());
        assert_eq!(x.value.to_bits(), y.value.to_bits());
    }
}

#[test]
fn untrained_e2gn2_actions_are_centered() {
    // At initialization the action mean is identically zero, so sampled
    // movements reduce to the exploration noise, which is symmetric.
    let spec = EnvSpec::spread(3, 3);
    let config = small_trainer(600, 200, 23);
    let (_, _, batch) = collect(&spec, NetworkKind::E2gn2, &config);
    let n = batch.len() as f64;
    for k in 0..2 {
        let mean: f64 = batch.transitions.iter().map(|t| t.action.movement[k]).sum::<f64>() / n;
        let var: f64 = batch
            .transitions
            .iter()
            .map(|t| (t.action.movement[k] - mean).powi(2))
            .sum::<f64>()
            / n;
        let se = (var / n).sqrt();
        assert!(mean.abs() < 3.0 * se, "axis {} mean {} se {}", k, mean, se);
    }
}

#[test]
fn env_actions_are_clipped_to_the_thrust_bound() {
    let a = ActionSample { movement: [5.0, -0.25], mode: None, target: None };
    let e = to_env_action(&a, 1.0);
    assert_eq!(e.movement, [1.0, -0.25]);
}

// ---------------------------------------------------------------------------
// PPO updates
// ---------------------------------------------------------------------------

fn rollout_with_gae(
    spec: &EnvSpec,
    kind: NetworkKind,
    config: &TrainerConfig,
) -> (NetworkParams, NetworkParams, TrajectoryBatch) {
    let (policy, value_net, mut batch) = collect(spec, kind, config);
    compute_gae(&mut batch, config.gamma, config.lambda);
    (policy, value_net, batch)
}

fn value_mse(value_net: &NetworkParams, batch: &TrajectoryBatch) -> f64 {
    let mut total = 0.0;
    for t in &batch.transitions {
        let mut tape = Tape::new();
        let mut binder = value_net.binder();
        let emb = value_net.forward(&mut tape, &mut binder, &t.obs).unwrap();
        let v = value_net.value(&mut tape, &mut binder, &emb, t.agent_node).unwrap();
        let v = tape.value(v).data[0];
        total += (v - t.ret).powi(2);
    }
    total / batch.len() as f64
}

#[test]
fn one_update_reduces_the_value_regression_error() {
    let spec = EnvSpec::spread(2, 2);
    let config = small_trainer(400, 200, 31);
    let (mut policy, mut value_net, mut batch) =
        rollout_with_gae(&spec, NetworkKind::Egnn, &config);
    let before = value_mse(&value_net, &batch);
    let mut opt_p = Adam::new(&policy.store, config.lr);
    let mut opt_v = Adam::new(&value_net.store, 1e-3);
    ppo_update(&mut policy, &mut value_net, &mut opt_p, &mut opt_v, &mut batch, &config, 0, (0.0, 1.0))
        .unwrap();
    let after = value_mse(&value_net, &batch);
    assert!(after < before, "value MSE went from {} to {}", before, after);
}

fn mean_log_prob(policy: &NetworkParams, batch: &TrajectoryBatch, positive: bool) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for t in &batch.transitions {
        if (t.advantage > 0.0) != positive {
            continue;
        }
        let mut tape = Tape::new();
        let mut binder = policy.binder();
        let emb = policy.forward(&mut tape, &mut binder, &t.obs).unwrap();
        let heads = policy
            .policy_heads(&mut tape, &mut binder, &emb, t.agent_node, &t.enemy_nodes, &t.enemy_alive)
            .unwrap();
        let lp = e2gn2_core::nets::action_log_prob(&mut tape, &heads, &t.action).unwrap();
        total += tape.value(lp).data[0];
        n += 1;
    }
    total / n as f64
}

#[test]
fn positive_advantage_actions_become_more_likely() {
    // Assign advantages by hand: shooting is good, everything else bad.
    // After updates the policy must shift probability mass accordingly,
    // exercising the gradient path through the discrete mode and target
    // heads that continuous-only environments never touch.
    let spec = EnvSpec::skirmish(2, 2, e2gn2_core::envs::InitScheme::All);
    let mut config = small_trainer(400, 200, 53);
    config.sgd_iters = 4;
    let (mut policy, mut value_net, mut batch) =
        rollout_with_gae(&spec, NetworkKind::E2gn2, &config);
    for t in &mut batch.transitions {
        t.advantage = if t.action.mode == Some(e2gn2_core::nets::MODE_SHOOT) { 1.0 } else { -1.0 };
    }
    let lp_pos_before = mean_log_prob(&policy, &batch, true);
    let lp_neg_before = mean_log_prob(&policy, &batch, false);
    let mut opt_p = Adam::new(&policy.store, config.lr);
    let mut opt_v = Adam::new(&value_net.store, 0.0);
    for salt in 0..3 {
        let mut b = batch.clone();
        ppo_update(&mut policy, &mut value_net, &mut opt_p, &mut opt_v, &mut b, &config, salt, (0.0, 1.0))
            .unwrap();
    }
    let lp_pos_after = mean_log_prob(&policy, &batch, true);
    let lp_neg_after = mean_log_prob(&policy, &batch, false);
    assert!(
        lp_pos_after > lp_pos_before,
        "good actions got less likely: {} -> {}",
        lp_pos_before,
        lp_pos_after
    );
    assert!(
        lp_pos_after - lp_pos_before > lp_neg_after - lp_neg_before,
        "good actions did not gain on bad ones: +{} vs +{}",
        lp_pos_after - lp_pos_before,
        lp_neg_after - lp_neg_before
    );
}

#[test]
fn advantages_teach_state_dependent_steering() {
    // Reward moving toward the nearest landmark. Unlike the mode-head
    // check above, the good direction differs per state, so passing
    // requires gradient flow from the advantage through the movement
    // mean's dependence on the observation graph.
    let spec = EnvSpec::spread(2, 2);
    let mut config = small_trainer(600, 300, 59);
    config.sgd_iters = 4;
    let (mut policy, mut value_net, mut batch) =
        rollout_with_gae(&spec, NetworkKind::E2gn2, &config);

    let dir_to_landmark = |t: &Transition| -> [f64; 2] {
        let p = t.obs.nodes[t.agent_node].coords[0];
        let mut best = f64::INFINITY;
        let mut d = [0.0, 0.0];
        for ln in [2usize, 3] {
            let q = t.obs.nodes[ln].coords[0];
            let dd = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            if dd < best {
                best = dd;
                d = [q[0] - p[0], q[1] - p[1]];
            }
        }
        let n = (d[0] * d[0] + d[1] * d[1]).sqrt().max(1e-9);
        [d[0] / n, d[1] / n]
    };
    for t in &mut batch.transitions {
        let u = dir_to_landmark(t);
        let dot = t.action.movement[0] * u[0] + t.action.movement[1] * u[1];
        t.advantage = if dot > 0.0 { 1.0 } else { -1.0 };
    }

    let alignment = |policy: &NetworkParams, batch: &TrajectoryBatch| -> f64 {
        let mut total = 0.0;
        for t in &batch.transitions {
            let mut tape = Tape::new();
            let mut binder = policy.binder();
            let emb = policy.forward(&mut tape, &mut binder, &t.obs).unwrap();
            let heads = policy
                .policy_heads(&mut tape, &mut binder, &emb, t.agent_node, &[], &[])
                .unwrap();
            let m = tape.value(heads.mean).data.clone();
            let u = dir_to_landmark(t);
            total += m[0] * u[0] + m[1] * u[1];
        }
        total / batch.len() as f64
    };

    let before = alignment(&policy, &batch);
    let mut opt_p = Adam::new(&policy.store, config.lr);
    let mut opt_v = Adam::new(&value_net.store, 0.0);
    for salt in 0..5 {
        let mut b = batch.clone();
        ppo_update(&mut policy, &mut value_net, &mut opt_p, &mut opt_v, &mut b, &config, salt, (0.0, 1.0))
            .unwrap();
    }
    let after = alignment(&policy, &batch);
    assert!(
        after > before + 1e-4,
        "mean action alignment did not improve: {} -> {}",
        before,
        after
    );
}

#[test]
fn zero_advantages_leave_only_the_entropy_bonus() {
    let spec = EnvSpec::spread(2, 2);
    let config = small_trainer(200, 200, 37);
    let (mut policy, mut value_net, mut batch) =
        rollout_with_gae(&spec, NetworkKind::Egnn, &config);
    for t in &mut batch.transitions {
        t.advantage = 0.0;
    }
    let mut opt_p = Adam::new(&policy.store, 0.0);
    let mut opt_v = Adam::new(&value_net.store, 0.0);
    let stats =
        ppo_update(&mut policy, &mut value_net, &mut opt_p, &mut opt_v, &mut batch, &config, 0, (0.0, 1.0))
            .unwrap();
    // Surrogate term vanishes; the reported policy loss is exactly the
    // negated entropy bonus.
    assert!(
        (stats.policy_loss + config.entropy_coef * stats.entropy).abs() < 1e-9,
        "policy loss {} entropy {}",
        stats.policy_loss,
        stats.entropy
    );
}

#[test]
fn clipped_surrogate_never_exceeds_the_unclipped_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..1000 {
        let ratio: f64 = rng.gen_range(0.0..3.0);
        let adv = rng.gen_range(-2.0..2.0);
        let clip = 0.2;
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
        assert!(unclipped.min(clipped) <= unclipped + 1e-15);
    }
}

#[test]
fn update_statistics_are_finite_and_entropy_positive() {
    let spec = EnvSpec::skirmish(2, 2, e2gn2_core::envs::InitScheme::All);
    let mut config = small_trainer(200, 100, 43);
    config.sgd_iters = 2;
    let (mut policy, mut value_net, mut batch) =
        rollout_with_gae(&spec, NetworkKind::E2gn2, &config);
    let mut opt_p = Adam::new(&policy.store, config.lr);
    let mut opt_v = Adam::new(&value_net.store, config.lr);
    let stats =
        ppo_update(&mut policy, &mut value_net, &mut opt_p, &mut opt_v, &mut batch, &config, 0, (0.0, 1.0))
            .unwrap();
    assert!(stats.policy_loss.is_finite());
    assert!(stats.value_loss.is_finite() && stats.value_loss >= 0.0);
    assert!(stats.entropy > 0.0);
    assert!(stats.policy_grad_norm.is_finite());
    assert!(stats.value_grad_norm.is_finite());
}

#[test]
fn update_is_invariant_to_relabeling_agents_in_the_graph() {
    // Renumber the nodes of every observation graph; the shared-parameter
    // update must not care which index an agent occupies.
    let spec = EnvSpec::spread(3, 3);
    let config = small_trainer(150, 150, 47);
    let (policy, value_net, mut batch) = rollout_with_gae(&spec, NetworkKind::E2gn2, &config);

    let perm = [2usize, 0, 1, 4, 5, 3];
    let mut permuted = batch.clone();
    let mut cache: std::collections::BTreeMap<usize, Rc<GraphState>> =
        std::collections::BTreeMap::new();
    for t in &mut permuted.transitions {
        let key = Rc::as_ptr(&t.obs) as usize;
        let g = cache
            .entry(key)
            .or_insert_with(|| Rc::new(t.obs.permuted(&perm).unwrap()));
        t.obs = Rc::clone(g);
        t.agent_node = perm[t.agent_node];
        t.enemy_nodes = Rc::new(t.enemy_nodes.iter().map(|&e| perm[e]).collect());
    }

    let run = |mut p: NetworkParams, mut v: NetworkParams, b: &mut TrajectoryBatch| {
        let mut op = Adam::new(&p.store, config.lr);
        let mut ov = Adam::new(&v.store, config.lr);
        ppo_update(&mut p, &mut v, &mut op, &mut ov, b, &config, 0, (0.0, 1.0)).unwrap();
        let flat: Vec<f64> = p
            .store
            .iter()
            .flat_map(|(_, a)| a.data.iter().copied())
            .chain(v.store.iter().flat_map(|(_, a)| a.data.iter().copied()))
            .collect();
        flat
    };

    let a = run(policy.clone(), value_net.clone(), &mut batch);
    let b = run(policy, value_net, &mut permuted);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9, "params diverged: {} vs {}", x, y);
    }
}

#[test]
fn bad_minibatch_split_is_rejected() {
    let mut config = TrainerConfig::mpe();
    config.minibatch = 300;
    assert!(config.validate().is_err());
    config.minibatch = 0;
    assert!(config.validate().is_err());
}

#[test]
#[ignore]
fn diag_advantage_quality_correlation() {
    let spec = EnvSpec::spread(3, 3);
    let mut config = small_trainer(4000, 1000, 61);
    config.sgd_iters = 10;
    let kind = NetworkKind::E2gn2;
    let mut policy = NetworkParams::init(spec.net_config(kind), config.seed).unwrap();
    let mut value_net = NetworkParams::init(spec.net_config(kind), config.seed + 1).unwrap();
    let mut opt_p = Adam::new(&policy.store, 0.0);
    let mut opt_v = Adam::new(&value_net.store, config.lr);
    let mut vstats = (0.0, 1.0);
    let mut have = false;
    for it in 0..4u64 {
        let mut factory = |seed: u64| spec.make(seed);
        let mut batch =
            collect_rollouts(&policy, &value_net, &mut factory, &config, it, vstats).unwrap();
        compute_gae(&mut batch, config.gamma, config.lambda);
        let n = batch.len() as f64;
        let m = batch.transitions.iter().map(|t| t.ret).sum::<f64>() / n;
        let sd = (batch.transitions.iter().map(|t| (t.ret - m).powi(2)).sum::<f64>() / n)
            .sqrt()
            .max(1e-6);
        if have {
            vstats = (0.8 * vstats.0 + 0.2 * m, 0.8 * vstats.1 + 0.2 * sd);
        } else {
            vstats = (m, sd);
            have = true;
        }
        if it < 3 {
            ppo_update(&mut policy, &mut value_net, &mut opt_p, &mut opt_v, &mut batch, &config, it, vstats)
                .unwrap();
            continue;
        }
        // Quality: unit-direction dot product toward nearest landmark.
        let quality = |t: &Transition| -> f64 {
            let p = t.obs.nodes[t.agent_node].coords[0];
            let mut best = f64::INFINITY;
            let mut d = [0.0, 0.0];
            for ln in 3..6usize {
                let q = t.obs.nodes[ln].coords[0];
                let dd = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                if dd < best {
                    best = dd;
                    d = [q[0] - p[0], q[1] - p[1]];
                }
            }
            let nn = (d[0] * d[0] + d[1] * d[1]).sqrt().max(1e-9);
            (t.action.movement[0] * d[0] + t.action.movement[1] * d[1]) / nn
        };
        normalize_advantages(&mut batch);
        let n = batch.len() as f64;
        let qs: Vec<f64> = batch.transitions.iter().map(quality).collect();
        let qm = qs.iter().sum::<f64>() / n;
        let qs2 = qs.iter().map(|q| (q - qm).powi(2)).sum::<f64>() / n;
        let cov = batch
            .transitions
            .iter()
            .zip(&qs)
            .map(|(t, q)| t.advantage * (q - qm))
            .sum::<f64>()
            / n;
        let corr = cov / qs2.sqrt();
        let se = 1.0 / n.sqrt();
        println!("corr(advantage, toward-landmark) = {:.4} (se {:.4})", corr, se);
    }
}

#[test]
#[ignore]
fn diag_scripted_spread_policy_beats_random() {
    use e2gn2_core::envs::{AgentAction, Team};
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut totals = [0.0f64; 2]; // scripted, random
    let episodes = 40;
    for ep in 0..episodes {
        for mode in 0..2 {
            let spec = EnvSpec::spread(3, 3);
            let mut env = spec.make(ep as u64).unwrap();
            let mut total = 0.0;
            loop {
                let state = env.state();
                let agents: Vec<usize> = state
                    .entities
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.team == Team::Agent && e.alive)
                    .map(|(i, _)| i)
                    .collect();
                let landmarks: Vec<[f64; 2]> = state
                    .entities
                    .iter()
                    .filter(|e| e.team != Team::Agent)
                    .map(|e| e.pos)
                    .collect();
                let actions: Vec<AgentAction> = agents
                    .iter()
                    .map(|&i| {
                        if mode == 1 {
                            return AgentAction::movement([
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(-1.0..1.0),
                            ]);
                        }
                        let p = state.entities[i].pos;
                        let mut best = f64::INFINITY;
                        let mut d = [0.0, 0.0];
                        for q in &landmarks {
                            let dd = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                            if dd < best {
                                best = dd;
                                d = [q[0] - p[0], q[1] - p[1]];
                            }
                        }
                        let n = (d[0] * d[0] + d[1] * d[1]).sqrt().max(1e-9);
                        AgentAction::movement([d[0] / n, d[1] / n])
                    })
                    .collect();
                let r = env.step(&actions).unwrap();
                total += r.rewards[0];
                if r.done {
                    break;
                }
            }
            totals[mode] += total / episodes as f64;
        }
    }
    println!("scripted mean return {:.2}  random mean return {:.2}", totals[0], totals[1]);
}
