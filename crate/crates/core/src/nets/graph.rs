use crate::nets::NetError;

/// Per-node observation: invariant features plus one or more equivariant
/// 2-D coordinate channels (position, velocity, ...). Every channel
/// transforms with the same orthogonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub h: Vec<f64>,
    pub coords: Vec<[f64; 2]>,
}

/// Graph-structured observation. Edges are directed pairs `(dst, src)`:
/// node `src` contributes a message to node `dst`. Edge order is part of
/// the state; per-node sums accumulate in edge-list order, which makes
/// permutation equivariance bitwise-testable.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize)>,
}

impl GraphState {
    pub fn new(nodes: Vec<GraphNode>, edges: Vec<(usize, usize)>) -> Result<Self, NetError> {
        let g = GraphState { nodes, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.nodes.is_empty() {
            return Err(NetError::EmptyGraph);
        }
        let h_dim = self.nodes[0].h.len();
        let c = self.nodes[0].coords.len();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.h.len() != h_dim || n.coords.len() != c {
                return Err(NetError::Graph(format!(
                    "node {} dims ({}, {}) disagree with node 0 ({}, {})",
                    i,
                    n.h.len(),
                    n.coords.len(),
                    h_dim,
                    c
                )));
            }
            if !n.h.iter().all(|v| v.is_finite())
                || !n.coords.iter().all(|v| v[0].is_finite() && v[1].is_finite())
            {
                return Err(NetError::Graph(format!("node {} has non-finite features", i)));
            }
        }
        for &(d, s) in &self.edges {
            if d >= self.nodes.len() || s >= self.nodes.len() {
                return Err(NetError::Graph(format!(
                    "edge ({}, {}) out of range for {} nodes",
                    d,
                    s,
                    self.nodes.len()
                )));
            }
            if d == s {
                return Err(NetError::Graph(format!("self-edge at node {}", d)));
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn h_dim(&self) -> usize {
        self.nodes[0].h.len()
    }

    pub fn n_channels(&self) -> usize {
        self.nodes[0].coords.len()
    }

    /// In-degree of each node under the directed edge list.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.nodes.len()];
        for &(d, _) in &self.edges {
            deg[d] += 1;
        }
        deg
    }

    /// Relabel nodes by `perm` (node i becomes node perm[i]), mapping the
    /// edge list in place so accumulation order is preserved.
    pub fn permuted(&self, perm: &[usize]) -> Result<GraphState, NetError> {
        if perm.len() != self.nodes.len() {
            return Err(NetError::Graph("permutation length mismatch".into()));
        }
        let mut nodes = vec![self.nodes[0].clone(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            nodes[perm[i]] = n.clone();
        }
        let edges = self.edges.iter().map(|&(d, s)| (perm[d], perm[s])).collect();
        GraphState::new(nodes, edges)
    }

    /// Apply a 2x2 matrix to every coordinate channel of every node.
    pub fn transformed(&self, t: &[[f64; 2]; 2]) -> GraphState {
        let mut g = self.clone();
        for n in &mut g.nodes {
            for c in &mut n.coords {
                let (x, y) = (c[0], c[1]);
                c[0] = t[0][0] * x + t[0][1] * y;
                c[1] = t[1][0] * x + t[1][1] * y;
            }
        }
        g
    }

    /// Add a translation to every coordinate channel of every node.
    pub fn translated(&self, t: [f64; 2]) -> GraphState {
        let mut g = self.clone();
        for n in &mut g.nodes {
            for c in &mut n.coords {
                c[0] += t[0];
                c[1] += t[1];
            }
        }
        g
    }

    /// Fully connected graph over `n` nodes, edges grouped by destination.
    pub fn fully_connected_edges(n: usize) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1));
        for d in 0..n {
            for s in 0..n {
                if d != s {
                    edges.push((d, s));
                }
            }
        }
        edges
    }
}
