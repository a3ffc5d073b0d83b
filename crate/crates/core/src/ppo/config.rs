use crate::ppo::TrainError;

/// PPO hyperparameters. The two presets mirror the standard settings for
/// particle-world and skirmish training: large batches, few SGD passes,
/// small clip.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub train_batch: usize,
    pub minibatch: usize,
    pub clip: f64,
    pub lr: f64,
    pub sgd_iters: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub total_steps: usize,
    pub seed: u64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Parallel environment instances during collection.
    pub n_workers: usize,
    /// Iterations between checkpoints (0 = final only).
    pub checkpoint_every: usize,
}

impl TrainerConfig {
    pub fn mpe() -> Self {
        TrainerConfig {
            train_batch: 2000,
            minibatch: 1000,
            clip: 0.2,
            lr: 30e-5,
            sgd_iters: 10,
            gamma: 0.99,
            lambda: 0.95,
            total_steps: 200_000,
            seed: 0,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 10.0,
            n_workers: 1,
            checkpoint_every: 0,
        }
    }

    pub fn smac() -> Self {
        TrainerConfig {
            train_batch: 8000,
            minibatch: 2000,
            clip: 0.1,
            lr: 25e-5,
            sgd_iters: 15,
            gamma: 0.99,
            lambda: 0.95,
            total_steps: 400_000,
            seed: 0,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 10.0,
            n_workers: 1,
            checkpoint_every: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.minibatch == 0 || self.train_batch % self.minibatch != 0 {
            return Err(TrainError::BadConfig(format!(
                "minibatch {} must divide train batch {}",
                self.minibatch, self.train_batch
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(TrainError::BadConfig(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(TrainError::BadConfig(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.n_workers == 0 {
            return Err(TrainError::BadConfig("n_workers must be at least 1".into()));
        }
        Ok(())
    }
}
