//! The six experiment entry points behind the CLI subcommands. Each one
//! reads its own settings section, writes CSV (and SVG where applicable)
//! into the output directory, and reports pass/fail per assertion.

use std::path::Path;

use e2gn2_core::autodiff::Tape;
use e2gn2_core::envs::{apply_symmetry, InitScheme, SymmetryTransform};
use e2gn2_core::nets::{self, GraphNode, GraphState, NetConfig, NetworkKind, NetworkParams};
use e2gn2_core::ppo::{train, EnvSpec, TrainerConfig, TrainResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{episode_seed, run_episode, EpisodeOutcome};
use crate::plot::{line_chart, Series};
use crate::report::{fmt_f64, sign_test_p, write_csv, Cell};
use crate::settings::{worker_count, Settings};
use crate::{CliError, Outcome};

fn parse_kind(s: &str) -> Result<NetworkKind, CliError> {
    NetworkKind::parse(s)
        .ok_or_else(|| CliError::Config(format!("unknown network kind `{}`", s)))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// bias-probe
// ---------------------------------------------------------------------------

/// The fixed probe scene: one agent at (2, 0) with two nearby neighbors,
/// a single coordinate channel, two layers.
fn probe_graph() -> GraphState {
    let nodes = vec![
        GraphNode { h: vec![1.0, 0.0], coords: vec![[2.0, 0.0]] },
        GraphNode { h: vec![0.0, 1.0], coords: vec![[2.3, 0.2]] },
        GraphNode { h: vec![0.0, 1.0], coords: vec![[1.8, -0.3]] },
    ];
    GraphState::new(nodes, GraphState::fully_connected_edges(3)).unwrap()
}

fn probe_config(kind: NetworkKind) -> NetConfig {
    NetConfig::graph(kind, 2, 1, 2, 0)
}

struct BiasRow {
    kind: NetworkKind,
    mean: Cell,
    mean_y: Cell,
    p_neg: f64,
    inits: usize,
}

fn bias_probe_kind(kind: NetworkKind, inits: usize, seed: u64) -> Result<BiasRow, CliError> {
    let g = probe_graph();
    let mut xs = Vec::with_capacity(inits);
    let mut ys = Vec::with_capacity(inits);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x626961);
    let mut negatives = 0usize;
    for i in 0..inits {
        let net = NetworkParams::init(probe_config(kind), episode_seed(seed, i as u64))?;
        let mut tape = Tape::new();
        let mut binder = net.binder();
        let emb = net.forward(&mut tape, &mut binder, &g)?;
        let heads = net.policy_heads(&mut tape, &mut binder, &emb, 0, &[], &[])?;
        let mean = tape.value(heads.mean);
        xs.push(mean.data[0]);
        ys.push(mean.data[1]);
        // One action draw with sigma = 1 on the x component.
        let (a, b): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
        let z = (-2.0 * a.ln()).sqrt() * b.cos();
        if mean.data[0] + z < 0.0 {
            negatives += 1;
        }
    }
    Ok(BiasRow {
        kind,
        mean: Cell::from_samples(&xs),
        mean_y: Cell::from_samples(&ys),
        p_neg: negatives as f64 / inits as f64,
        inits,
    })
}

pub fn run_bias_probe(settings: &Settings, out: &Path) -> Result<Outcome, CliError> {
    let section = "bias-probe";
    let inits: usize = settings.get_parsed(section, "inits", 10_000)?;
    let seed: u64 = settings.get_parsed(section, "seed", 0)?;
    let mut outcome = Outcome::new();
    let mut rows = Vec::new();

    for kind in [NetworkKind::Egnn, NetworkKind::E2gn2] {
        let row = bias_probe_kind(kind, inits, seed)?;
        let target = match kind {
            NetworkKind::Egnn => [2.0, 0.0],
            _ => [0.0, 0.0],
        };
        let ok_x = (row.mean.mean - target[0]).abs() < 3.0 * row.mean.se;
        let ok_y = (row.mean_y.mean - target[1]).abs() < 3.0 * row.mean_y.se;
        outcome.check(
            &format!("{} mean action near ({}, {})", kind.name(), target[0], target[1]),
            ok_x && ok_y,
            format!("x {} | y {}", row.mean.display(), row.mean_y.display()),
        );
        if kind == NetworkKind::Egnn {
            outcome.check(
                "egnn P(x < 0) near 0.02",
                (row.p_neg - 0.02).abs() <= 0.01,
                format!("empirical {:.4} over {} draws", row.p_neg, inits),
            );
        }
        rows.push(row);
    }

    write_csv(
        &out.join("bias.csv"),
        "network,mean_x,se_x,mean_y,se_y,p_x_negative,inits",
        rows.iter().map(|r| {
            vec![
                r.kind.name().to_string(),
                fmt_f64(r.mean.mean),
                fmt_f64(r.mean.se),
                fmt_f64(r.mean_y.mean),
                fmt_f64(r.mean_y.se),
                fmt_f64(r.p_neg),
                r.inits.to_string(),
            ]
        }),
    )?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// equiv-probe
// ---------------------------------------------------------------------------

fn random_probe_graph(rng: &mut ChaCha8Rng, h_in: usize, channels: usize) -> GraphState {
    let n = rng.gen_range(3..=6);
    let nodes = (0..n)
        .map(|_| GraphNode {
            h: (0..h_in).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            coords: (0..channels)
                .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                .collect(),
        })
        .collect();
    GraphState::new(nodes, GraphState::fully_connected_edges(n)).unwrap()
}

fn forward_values(
    net: &NetworkParams,
    g: &GraphState,
) -> Result<(Vec<f64>, Option<Vec<f64>>), CliError> {
    let mut tape = Tape::new();
    let mut binder = net.binder();
    let emb = net.forward(&mut tape, &mut binder, g)?;
    Ok((
        tape.value(emb.h).data.clone(),
        emb.u.map(|u| tape.value(u).data.clone()),
    ))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct EquivRow {
    kind: NetworkKind,
    transform: &'static str,
    coord_dev: f64,
    feat_dev: f64,
    trials: usize,
}

/// Largest deviation from exact equivariance over `trials` random
/// (network, graph, transform) triples.
fn equiv_deviation(
    kind: NetworkKind,
    transform: &'static str,
    trials: usize,
    seed: u64,
) -> Result<EquivRow, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x657175);
    let (h_in, channels) = (6, 2);
    let mut coord_dev = 0.0f64;
    let mut feat_dev = 0.0f64;
    for trial in 0..trials {
        let net = NetworkParams::init(
            NetConfig::graph(kind, h_in, channels, 2, 0),
            episode_seed(seed, trial as u64),
        )?;
        let g = random_probe_graph(&mut rng, h_in, channels);
        let (h, u) = forward_values(&net, &g)?;
        match transform {
            "rotation" | "reflection" => {
                let t = if transform == "rotation" {
                    SymmetryTransform::random_rotation(&mut rng)
                } else {
                    SymmetryTransform::random_reflection(&mut rng)
                };
                let gt = g.transformed(&t.matrix());
                let (ht, ut) = forward_values(&net, &gt)?;
                feat_dev = feat_dev.max(max_abs_diff(&h, &ht));
                if let (Some(u), Some(ut)) = (&u, &ut) {
                    // Transform the base output channel-wise and compare.
                    let mut want = u.clone();
                    let m = t.matrix();
                    for pair in want.chunks_mut(2) {
                        let (x, y) = (pair[0], pair[1]);
                        pair[0] = m[0][0] * x + m[0][1] * y;
                        pair[1] = m[1][0] * x + m[1][1] * y;
                    }
                    coord_dev = coord_dev.max(max_abs_diff(&want, ut));
                }
            }
            "translation" => {
                let shift = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                let gt = g.translated(shift);
                let (ht, ut) = forward_values(&net, &gt)?;
                feat_dev = feat_dev.max(max_abs_diff(&h, &ht));
                if let (Some(u), Some(ut)) = (&u, &ut) {
                    let want: Vec<f64> = u
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| v + shift[i % 2])
                        .collect();
                    coord_dev = coord_dev.max(max_abs_diff(&want, ut));
                }
            }
            other => return Err(CliError::Config(format!("unknown transform `{}`", other))),
        }
    }
    Ok(EquivRow { kind, transform, coord_dev, feat_dev, trials })
}

pub fn run_equiv_probe(settings: &Settings, out: &Path) -> Result<Outcome, CliError> {
    let section = "equiv-probe";
    let trials: usize = settings.get_parsed(section, "trials", 100)?;
    let seed: u64 = settings.get_parsed(section, "seed", 0)?;
    let mut outcome = Outcome::new();
    let mut rows = Vec::new();

    for kind in [NetworkKind::Egnn, NetworkKind::E2gn2] {
        for transform in ["rotation", "reflection"] {
            let row = equiv_deviation(kind, transform, trials, seed)?;
            outcome.check(
                &format!("{} {} equivariance", kind.name(), transform),
                row.coord_dev < 1e-5 && row.feat_dev < 1e-5,
                format!("coord dev {:.3e}, feature dev {:.3e}", row.coord_dev, row.feat_dev),
            );
            rows.push(row);
        }
    }

    // Translation separates the two architectures.
    let egnn_t = equiv_deviation(NetworkKind::Egnn, "translation", trials, seed)?;
    outcome.check(
        "egnn translation equivariance",
        egnn_t.coord_dev < 1e-5,
        format!("coord dev {:.3e}", egnn_t.coord_dev),
    );
    let e2gn2_t = equiv_deviation(NetworkKind::E2gn2, "translation", trials, seed)?;
    outcome.check(
        "e2gn2 breaks translation equivariance",
        e2gn2_t.coord_dev > 1e-3,
        format!("coord dev {:.3e}", e2gn2_t.coord_dev),
    );
    rows.push(egnn_t);
    rows.push(e2gn2_t);

    // Plain-GNN baseline is not rotation-invariant; its feature outputs
    // shift by far more than roundoff.
    let gnn = equiv_deviation(NetworkKind::Gnn, "rotation", trials, seed)?;
    outcome.check(
        "gnn baseline is not equivariant",
        gnn.feat_dev > 1e-2,
        format!("feature dev {:.3e}", gnn.feat_dev),
    );
    rows.push(gnn);

    write_csv(
        &out.join("equiv.csv"),
        "network,transform,max_coord_dev,max_feature_dev,trials",
        rows.iter().map(|r| {
            vec![
                r.kind.name().to_string(),
                r.transform.to_string(),
                fmt_f64(r.coord_dev),
                fmt_f64(r.feat_dev),
                r.trials.to_string(),
            ]
        }),
    )?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn env_spec_from(settings: &Settings, section: &str) -> Result<EnvSpec, CliError> {
    let env = settings.get_str(section, "env", "spread");
    let agents: usize = settings.get_parsed(section, "agents", 3)?;
    match env {
        "spread" => {
            let landmarks: usize = settings.get_parsed(section, "landmarks", agents)?;
            Ok(EnvSpec::spread(agents, landmarks))
        }
        "tag" => Ok(EnvSpec::tag(agents)),
        "skirmish" => {
            let enemies: usize = settings.get_parsed(section, "enemies", agents)?;
            let scheme = InitScheme::parse(settings.get_str(section, "scheme", "all"))?;
            Ok(EnvSpec::skirmish(agents, enemies, scheme))
        }
        other => Err(CliError::Config(format!("unknown env `{}`", other))),
    }
}

fn trainer_config_from(
    settings: &Settings,
    section: &str,
    spec: &EnvSpec,
    seed: u64,
) -> Result<TrainerConfig, CliError> {
    let mut config = if spec.name == e2gn2_core::envs::EnvName::Skirmish {
        TrainerConfig::smac()
    } else {
        TrainerConfig::mpe()
    };
    config.seed = seed;
    config.total_steps = settings.get_parsed(section, "steps", config.total_steps)?;
    config.train_batch = settings.get_parsed(section, "train_batch", config.train_batch)?;
    config.minibatch = settings.get_parsed(section, "minibatch", config.minibatch)?;
    config.lr = settings.get_parsed(section, "lr", config.lr)?;
    config.sgd_iters = settings.get_parsed(section, "sgd_iters", config.sgd_iters)?;
    config.checkpoint_every =
        settings.get_parsed(section, "checkpoint_every", config.checkpoint_every)?;
    config.n_workers = worker_count();
    Ok(config)
}

fn write_metrics_csv(path: &Path, result: &TrainResult) -> Result<(), CliError> {
    write_csv(
        path,
        "iteration,env_steps,mean_reward,win_rate,entropy,mean_abs_action,policy_loss,value_loss",
        result.history.iter().map(|s| {
            vec![
                s.iteration.to_string(),
                s.env_steps.to_string(),
                fmt_f64(s.mean_reward),
                fmt_opt(s.win_rate),
                fmt_f64(s.entropy),
                fmt_f64(s.mean_abs_action),
                fmt_f64(s.policy_loss),
                fmt_f64(s.value_loss),
            ]
        }),
    )
}

pub fn run_train(settings: &Settings, out: &Path) -> Result<Outcome, CliError> {
    let section = "train";
    let kind = parse_kind(settings.get_str(section, "network", "e2gn2"))?;
    let seed: u64 = settings.get_parsed(section, "seed", 0)?;
    let spec = env_spec_from(settings, section)?;
    let config = trainer_config_from(settings, section, &spec, seed)?;

    let result = train(kind, &spec, &config, Some(out))?;
    write_metrics_csv(&out.join("metrics.csv"), &result)?;

    // Wall time is informational only and lives outside the CSV so reruns
    // stay byte-identical.
    let wall = result.history.last().map(|s| s.wall_seconds).unwrap_or(0.0);
    std::fs::write(out.join("timings.txt"), format!("wall_seconds = {:.1}\n", wall))
        .map_err(|e| CliError::Io(out.join("timings.txt").display().to_string(), e))?;

    let series = vec![Series {
        name: kind.name().to_string(),
        points: result
            .history
            .iter()
            .map(|s| (s.env_steps as f64, s.mean_reward))
            .collect(),
        se: None,
    }];
    line_chart(
        &out.join("reward.svg"),
        &format!("{} on {} (seed {})", kind.name(), spec.name.name(), seed),
        "environment steps",
        "mean episode reward",
        &series,
    )?;

    let mut outcome = Outcome::new();
    outcome.check(
        "training completed",
        !result.history.is_empty(),
        format!(
            "{} iterations, final mean reward {:.3}",
            result.history.len(),
            result.history.last().map(|s| s.mean_reward).unwrap_or(0.0)
        ),
    );
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

pub fn run_compare(settings: &Settings, out: &Path) -> Result<Outcome, CliError> {
    let section = "compare";
    let kinds: Vec<NetworkKind> = settings
        .get_str(section, "networks", "egnn,e2gn2")
        .split(',')
        .map(|s| parse_kind(s.trim()))
        .collect::<Result<_, _>>()?;
    let seeds = settings.seeds(section, &[0, 1, 2, 3, 4])?;
    let spec = env_spec_from(settings, section)?;

    let mut histories: Vec<(NetworkKind, u64, TrainResult)> = Vec::new();
    for &kind in &kinds {
        for &seed in &seeds {
            let config = trainer_config_from(settings, section, &spec, seed)?;
            let result = train(kind, &spec, &config, None)?;
            histories.push((kind, seed, result));
        }
    }

    let mut rows = Vec::new();
    for (kind, seed, result) in &histories {
        for s in &result.history {
            rows.push(vec![
                kind.name().to_string(),
                seed.to_string(),
                s.iteration.to_string(),
                s.env_steps.to_string(),
                fmt_f64(s.mean_reward),
                fmt_opt(s.win_rate),
                fmt_f64(s.entropy),
            ]);
        }
    }
    write_csv(
        &out.join("curves.csv"),
        "network,seed,iteration,env_steps,mean_reward,win_rate,entropy",
        rows,
    )?;

    // Mean ± SE band per kind, seed-aligned by iteration.
    let mut series = Vec::new();
    for &kind in &kinds {
        let runs: Vec<&TrainResult> = histories
            .iter()
            .filter(|(k, _, _)| *k == kind)
            .map(|(_, _, r)| r)
            .collect();
        let iters = runs.iter().map(|r| r.history.len()).min().unwrap_or(0);
        let mut points = Vec::with_capacity(iters);
        let mut se = Vec::with_capacity(iters);
        for i in 0..iters {
            let samples: Vec<f64> = runs.iter().map(|r| r.history[i].mean_reward).collect();
            let cell = Cell::from_samples(&samples);
            points.push((runs[0].history[i].env_steps as f64, cell.mean));
            se.push(cell.se);
        }
        series.push(Series { name: kind.name().to_string(), points, se: Some(se) });
    }
    line_chart(
        &out.join("compare.svg"),
        &format!("network comparison on {}", spec.name.name()),
        "environment steps",
        "mean episode reward",
        &series,
    )?;

    let mut outcome = Outcome::new();
    let per_kind_seed = |kind: NetworkKind| -> Vec<&TrainResult> {
        histories
            .iter()
            .filter(|(k, _, _)| *k == kind)
            .map(|(_, _, r)| r)
            .collect()
    };
    let early_mean = |r: &TrainResult| -> f64 {
        let n = r.history.len().min(10);
        r.history[..n].iter().map(|s| s.mean_reward).sum::<f64>() / n as f64
    };
    let auc = |r: &TrainResult| -> f64 {
        r.history.iter().map(|s| s.mean_reward).sum::<f64>() / r.history.len().max(1) as f64
    };

    if kinds.contains(&NetworkKind::Egnn) && kinds.contains(&NetworkKind::E2gn2) {
        let egnn = per_kind_seed(NetworkKind::Egnn);
        let e2gn2 = per_kind_seed(NetworkKind::E2gn2);
        let mut wins = 0;
        let mut losses = 0;
        for (a, b) in egnn.iter().zip(&e2gn2) {
            if early_mean(b) > early_mean(a) {
                wins += 1;
            } else if early_mean(b) < early_mean(a) {
                losses += 1;
            }
        }
        let p = sign_test_p(wins, losses);
        outcome.check(
            "e2gn2 starts ahead of egnn (first 10 iterations, sign test)",
            wins > losses && p < 0.05,
            format!("{} of {} seeds, p = {:.4}", wins, wins + losses, p),
        );
        for (name, runs) in [("egnn", &egnn), ("e2gn2", &e2gn2)] {
            let first: Vec<f64> = runs.iter().map(|r| r.history[0].mean_reward).collect();
            let last: Vec<f64> = runs
                .iter()
                .map(|r| r.history.last().unwrap().mean_reward)
                .collect();
            let f = Cell::from_samples(&first);
            let l = Cell::from_samples(&last);
            outcome.check(
                &format!("{} improves over its untrained start", name),
                l.mean > f.mean,
                format!("start {} -> end {}", f.display(), l.display()),
            );
        }
    }
    if kinds.contains(&NetworkKind::Gnn) && kinds.contains(&NetworkKind::E2gn2) {
        let gnn_auc = Cell::from_samples(
            &per_kind_seed(NetworkKind::Gnn).iter().map(|r| auc(r)).collect::<Vec<_>>(),
        );
        let e2_auc = Cell::from_samples(
            &per_kind_seed(NetworkKind::E2gn2).iter().map(|r| auc(r)).collect::<Vec<_>>(),
        );
        outcome.check(
            "e2gn2 area under curve at least matches gnn",
            e2_auc.mean >= gnn_auc.mean,
            format!("e2gn2 {} vs gnn {}", e2_auc.display(), gnn_auc.display()),
        );
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// generalize
// ---------------------------------------------------------------------------

fn obtain_policy(
    settings: &Settings,
    section: &str,
    kind: NetworkKind,
    spec: &EnvSpec,
    seed: u64,
    out: &Path,
) -> Result<NetworkParams, CliError> {
    if let Some(path) = settings.get(section, "checkpoint") {
        return Ok(nets::load(Path::new(path), Some(kind))?);
    }
    let config = trainer_config_from(settings, section, spec, seed)?;
    let result = train(kind, spec, &config, Some(out))?;
    write_metrics_csv(&out.join("metrics.csv"), &result)?;
    Ok(result.policy)
}

fn eval_win_rate(
    policy: &NetworkParams,
    spec: &EnvSpec,
    episodes: usize,
    seed: u64,
) -> Result<Cell, CliError> {
    let mut wins = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let mut env = spec.make(episode_seed(seed, e as u64))?;
        let outcome = run_episode(policy, env.as_mut(), None)?;
        wins.push(outcome.win_value());
    }
    Ok(Cell::from_samples(&wins))
}

/// Deterministic rollout of the same seed under a symmetry transform of
/// the initial state; equivariant policies must reproduce the reward
/// sequence exactly (up to roundoff).
fn rotation_oracle(
    policy: &NetworkParams,
    spec: &EnvSpec,
    episodes: usize,
    seed: u64,
) -> Result<f64, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f7261);
    let mut worst = 0.0f64;
    for e in 0..episodes {
        let t = if e % 2 == 0 {
            SymmetryTransform::random_rotation(&mut rng)
        } else {
            SymmetryTransform::random_reflection(&mut rng)
        };
        let mut env = spec.make(episode_seed(seed, e as u64))?;
        let mut env_t = spec.make(episode_seed(seed, e as u64))?;
        env_t.set_state(apply_symmetry(env.state(), &t));
        let base = run_episode(policy, env.as_mut(), None)?;
        let transformed = run_episode(policy, env_t.as_mut(), None)?;
        worst = worst.max(reward_gap(&base, &transformed));
    }
    Ok(worst)
}

fn reward_gap(a: &EpisodeOutcome, b: &EpisodeOutcome) -> f64 {
    if a.rewards.len() != b.rewards.len() {
        return f64::INFINITY;
    }
    max_abs_diff(&a.rewards, &b.rewards)
}

pub fn run_generalize(settings: &Settings, out: &Path) -> Result<Outcome, CliError> {
    let section = "generalize";
    let kind = parse_kind(settings.get_str(section, "network", "e2gn2"))?;
    let seed: u64 = settings.get_parsed(section, "seed", 0)?;
    let episodes: usize = settings.get_parsed(section, "eval_episodes", 300)?;
    let oracle_episodes: usize = settings.get_parsed(section, "oracle_episodes", 20)?;
    let agents: usize = settings.get_parsed(section, "agents", 5)?;
    let enemies: usize = settings.get_parsed(section, "enemies", agents)?;

    let train_spec = EnvSpec::skirmish(agents, enemies, InitScheme::Left);
    let policy = obtain_policy(settings, section, kind, &train_spec, seed, out)?;

    let mut outcome = Outcome::new();
    let mut cells = Vec::new();
    for scheme in [InitScheme::Left, InitScheme::Right, InitScheme::All] {
        let spec = EnvSpec::skirmish(agents, enemies, scheme);
        let cell = eval_win_rate(&policy, &spec, episodes, seed)?;
        outcome.note(format!("win rate {:?}: {}", scheme, cell.display()));
        cells.push((scheme, cell));
    }
    write_csv(
        &out.join("generalization.csv"),
        "scheme,win_rate,se,episodes",
        cells.iter().map(|(scheme, c)| {
            vec![
                format!("{:?}", scheme).to_lowercase(),
                fmt_f64(c.mean),
                fmt_f64(c.se),
                c.count.to_string(),
            ]
        }),
    )?;

    let left = cells[0].1;
    let right = cells[1].1;
    let gap = (left.mean - right.mean).abs();
    let combined = left.combined_se(&right).max(1e-12);
    match kind {
        NetworkKind::E2gn2 | NetworkKind::Egnn => {
            outcome.check(
                &format!("{} generalizes left -> right", kind.name()),
                gap <= 2.0 * combined,
                format!("|{:.3} - {:.3}| = {:.3} vs 2 SE = {:.3}", left.mean, right.mean, gap, 2.0 * combined),
            );
            let worst = rotation_oracle(&policy, &train_spec, oracle_episodes, seed)?;
            outcome.check(
                "deterministic policy reproduces rewards under symmetry",
                worst < 1e-4,
                format!("max reward gap {:.3e} over {} episodes", worst, oracle_episodes),
            );
        }
        NetworkKind::Gnn => {
            outcome.check(
                "gnn fails to generalize left -> right",
                left.mean - right.mean > 2.0 * combined,
                format!("left {} vs right {}", left.display(), right.display()),
            );
        }
        NetworkKind::Mlp => {
            outcome.note("mlp baseline: no generalization assertion".to_string());
        }
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// scale
// ---------------------------------------------------------------------------

pub fn run_scale(settings: &Settings, out: &Path) -> Result<Outcome, CliError> {
    let section = "scale";
    let kind = parse_kind(settings.get_str(section, "network", "e2gn2"))?;
    if kind == NetworkKind::Mlp {
        return Err(CliError::Config(
            "mlp cannot change agent count: its `trunk` input width is fixed by the \
             entity count it was trained with"
                .to_string(),
        ));
    }
    let seed: u64 = settings.get_parsed(section, "seed", 0)?;
    let episodes: usize = settings.get_parsed(section, "eval_episodes", 300)?;
    let train_agents: usize = settings.get_parsed(section, "agents", 5)?;
    let counts: Vec<usize> = settings
        .get_str(section, "counts", "4,5,6,7,8")
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad agent count `{}`", s)))
        })
        .collect::<Result<_, _>>()?;

    let train_spec = EnvSpec::skirmish(train_agents, train_agents, InitScheme::Left);
    let policy = obtain_policy(settings, section, kind, &train_spec, seed, out)?;

    let mut outcome = Outcome::new();
    let mut rows = Vec::new();
    for &n in &counts {
        let spec = EnvSpec::skirmish(n, n, InitScheme::All);
        let cell = eval_win_rate(&policy, &spec, episodes, seed)?;
        outcome.check(
            &format!("win rate at {} agents is a valid probability", n),
            cell.mean.is_finite() && (0.0..=1.0).contains(&cell.mean),
            cell.display(),
        );
        rows.push((n, cell));
    }
    write_csv(
        &out.join("scaling.csv"),
        "agents,win_rate,se,episodes",
        rows.iter().map(|(n, c)| {
            vec![n.to_string(), fmt_f64(c.mean), fmt_f64(c.se), c.count.to_string()]
        }),
    )?;
    outcome.note(format!(
        "trained at {} agents; evaluated at {:?} without structural change",
        train_agents, counts
    ));
    Ok(outcome)
}
