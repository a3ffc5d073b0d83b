//! Graph network architectures: the equivariant message-passing layers,
//! a plain GNN baseline, a flat MLP baseline, and the policy/value heads
//! that map node embeddings onto a mixed continuous/discrete action space.

mod checkpoint;
mod graph;
mod heads;
mod mlp;
mod network;

pub use checkpoint::{load, save};
pub use graph::{GraphNode, GraphState};
pub use heads::{
    action_log_prob, entropy, ActionDistribution, ActionSample, PolicyOut, MASKED, MODE_MOVE,
    MODE_NOOP, MODE_SHOOT,
};
pub use mlp::Mlp;
pub use network::{Embeddings, LayerParams, NetConfig, NetworkKind, NetworkParams};

use thiserror::Error;

use crate::autodiff::AdError;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("bad graph: {0}")]
    Graph(String),
    #[error("bad network config: {0}")]
    BadConfig(String),
    #[error("structural incompatibility in {head}: {detail}")]
    Structural { head: String, detail: String },
    #[error("corrupt checkpoint at byte {offset}: {detail}")]
    Corrupt { offset: usize, detail: String },
    #[error("checkpoint holds a {found} network, expected {expected}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("i/o error on {0}: {1}")]
    Io(String, std::io::Error),
    #[error(transparent)]
    Ad(#[from] AdError),
}
