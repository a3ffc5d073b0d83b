use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::envs::{EnvName, InitScheme, Skirmish, Spread, Tag, CHANNELS, H_DIM};
use crate::nets::{NetConfig, NetworkKind, NetworkParams};
use crate::ppo::{
    collect_rollouts, compute_gae, ppo_update, Adam, TrainError, TrainerConfig,
};

/// Which environment to build and at what size.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: EnvName,
    pub n_agents: usize,
    pub n_landmarks: usize,
    pub n_enemies: usize,
    pub scheme: InitScheme,
}

impl EnvSpec {
    pub fn spread(n_agents: usize, n_landmarks: usize) -> Self {
        EnvSpec {
            name: EnvName::Spread,
            n_agents,
            n_landmarks,
            n_enemies: 0,
            scheme: InitScheme::All,
        }
    }

    pub fn tag(n_pursuers: usize) -> Self {
        EnvSpec {
            name: EnvName::Tag,
            n_agents: n_pursuers,
            n_landmarks: 0,
            n_enemies: 0,
            scheme: InitScheme::All,
        }
    }

    pub fn skirmish(n_allies: usize, n_enemies: usize, scheme: InitScheme) -> Self {
        EnvSpec {
            name: EnvName::Skirmish,
            n_agents: n_allies,
            n_landmarks: 0,
            n_enemies,
            scheme,
        }
    }

    pub fn make(&self, seed: u64) -> Result<Box<dyn crate::envs::Env>, TrainError> {
        Ok(match self.name {
            EnvName::Spread => Box::new(Spread::new(self.n_agents, self.n_landmarks, seed)?),
            EnvName::Tag => Box::new(Tag::new(self.n_agents, seed)?),
            EnvName::Skirmish => {
                Box::new(Skirmish::new(self.n_agents, self.n_enemies, self.scheme, seed)?)
            }
        })
    }

    pub fn n_entities(&self) -> usize {
        match self.name {
            EnvName::Spread => self.n_agents + self.n_landmarks,
            EnvName::Tag => self.n_agents + 1,
            EnvName::Skirmish => self.n_agents + self.n_enemies,
        }
    }

    pub fn n_modes(&self) -> usize {
        if self.name == EnvName::Skirmish {
            3
        } else {
            0
        }
    }

    /// Architecture matching this environment's observation space.
    pub fn net_config(&self, kind: NetworkKind) -> NetConfig {
        match kind {
            NetworkKind::Mlp => NetConfig::mlp(
                H_DIM,
                CHANNELS,
                self.n_entities(),
                self.n_enemies,
                self.n_modes(),
            ),
            _ => NetConfig::graph(kind, H_DIM, CHANNELS, 2, self.n_modes()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IterStats {
    pub iteration: usize,
    pub env_steps: usize,
    pub wall_seconds: f64,
    pub mean_reward: f64,
    pub win_rate: Option<f64>,
    pub entropy: f64,
    pub mean_abs_action: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
}

pub struct TrainResult {
    pub policy: NetworkParams,
    pub value_net: NetworkParams,
    pub history: Vec<IterStats>,
    pub checkpoints: Vec<PathBuf>,
}

/// Train a parameter-shared policy plus a decentralized value network:
/// alternate rollout collection, advantage estimation, and PPO updates
/// until `config.total_steps` transitions have been consumed.
pub fn train(
    kind: NetworkKind,
    env_spec: &EnvSpec,
    config: &TrainerConfig,
    out_dir: Option<&Path>,
) -> Result<TrainResult, TrainError> {
    config.validate()?;
    let net_cfg = env_spec.net_config(kind);
    let mut policy = NetworkParams::init(net_cfg.clone(), config.seed)?;
    let mut value_net = NetworkParams::init(net_cfg, config.seed.wrapping_add(0x76616c)) ?;
    let mut opt_p = Adam::new(&policy.store, config.lr);
    let mut opt_v = Adam::new(&value_net.store, config.lr);

    let mut history = Vec::new();
    let mut checkpoints = Vec::new();
    let mut env_steps = 0usize;
    let mut iteration = 0usize;
    let start = Instant::now();

    // Running mean/std of empirical returns. The critic is trained on
    // normalized targets and its predictions are denormalized during
    // collection, so the regression is well-conditioned whatever the
    // reward scale of the environment.
    let mut value_stats = (0.0, 1.0);
    let mut have_stats = false;

    while env_steps < config.total_steps {
        let mut factory = |seed: u64| env_spec.make(seed);
        let mut batch = collect_rollouts(
            &policy,
            &value_net,
            &mut factory,
            config,
            iteration as u64,
            value_stats,
        )?;
        env_steps += batch.len();
        compute_gae(&mut batch, config.gamma, config.lambda);

        let n = batch.len() as f64;
        let mean_ret = batch.transitions.iter().map(|t| t.ret).sum::<f64>() / n;
        let var_ret = batch
            .transitions
            .iter()
            .map(|t| (t.ret - mean_ret).powi(2))
            .sum::<f64>()
            / n;
        let sd_ret = var_ret.sqrt().max(1e-6);
        if have_stats {
            value_stats.0 = 0.8 * value_stats.0 + 0.2 * mean_ret;
            value_stats.1 = 0.8 * value_stats.1 + 0.2 * sd_ret;
        } else {
            value_stats = (mean_ret, sd_ret);
            have_stats = true;
        }

        let mean_reward = if batch.episode_returns.is_empty() {
            0.0
        } else {
            batch.episode_returns.iter().sum::<f64>() / batch.episode_returns.len() as f64
        };
        let wins: Vec<bool> = batch.episode_wins.iter().filter_map(|w| *w).collect();
        let win_rate = if wins.is_empty() {
            None
        } else {
            Some(wins.iter().filter(|&&w| w).count() as f64 / wins.len() as f64)
        };
        let mean_abs_action = batch
            .transitions
            .iter()
            .map(|t| (t.action.movement[0].powi(2) + t.action.movement[1].powi(2)).sqrt())
            .sum::<f64>()
            / batch.len().max(1) as f64;

        let stats = ppo_update(
            &mut policy,
            &mut value_net,
            &mut opt_p,
            &mut opt_v,
            &mut batch,
            config,
            iteration as u64,
            value_stats,
        )?;

        eprintln!(
            "iter {:4}  steps {:8}  reward {:9.4}  win {}  entropy {:.3}",
            iteration,
            env_steps,
            mean_reward,
            win_rate.map_or_else(|| "   -".into(), |w| format!("{:.2}", w)),
            stats.entropy,
        );
        history.push(IterStats {
            iteration,
            env_steps,
            wall_seconds: start.elapsed().as_secs_f64(),
            mean_reward,
            win_rate,
            entropy: stats.entropy,
            mean_abs_action,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
        });

        iteration += 1;
        if let Some(dir) = out_dir {
            if config.checkpoint_every > 0 && iteration % config.checkpoint_every == 0 {
                let path = dir.join(format!("policy_iter{:05}.ckpt", iteration));
                crate::nets::save(&policy, &path)?;
                checkpoints.push(path);
            }
        }
    }

    if let Some(dir) = out_dir {
        let p = dir.join("policy.ckpt");
        crate::nets::save(&policy, &p)?;
        checkpoints.push(p);
        let v = dir.join("value.ckpt");
        crate::nets::save(&value_net, &v)?;
        checkpoints.push(v);
    }

    Ok(TrainResult { policy, value_net, history, checkpoints })
}
