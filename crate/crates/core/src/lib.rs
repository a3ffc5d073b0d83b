//! Equivariant graph network policies for multi-agent reinforcement
//! learning: a small reverse-mode autodiff engine, EGNN/E2GN2/GNN/MLP
//! policy and value networks, particle and skirmish environments, and a
//! PPO trainer with generalized advantage estimation.

pub mod autodiff;
pub mod envs;
pub mod nets;
pub mod ppo;
