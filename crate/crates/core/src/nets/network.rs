use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdError, Array, Binder, ParamId, ParamStore, Tape, ValueId};
use crate::nets::{GraphState, Mlp, NetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    Mlp,
    Gnn,
    Egnn,
    E2gn2,
}

impl NetworkKind {
    pub fn tag(self) -> u8 {
        match self {
            NetworkKind::Mlp => 0,
            NetworkKind::Gnn => 1,
            NetworkKind::Egnn => 2,
            NetworkKind::E2gn2 => 3,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(NetworkKind::Mlp),
            1 => Some(NetworkKind::Gnn),
            2 => Some(NetworkKind::Egnn),
            3 => Some(NetworkKind::E2gn2),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mlp" => Some(NetworkKind::Mlp),
            "gnn" => Some(NetworkKind::Gnn),
            "egnn" => Some(NetworkKind::Egnn),
            "e2gn2" => Some(NetworkKind::E2gn2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Mlp => "mlp",
            NetworkKind::Gnn => "gnn",
            NetworkKind::Egnn => "egnn",
            NetworkKind::E2gn2 => "e2gn2",
        }
    }
}

/// Architecture hyperparameters. Internal GNN sub-networks are 2 affine
/// layers of width 32; the flat MLP baseline uses two hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub kind: NetworkKind,
    /// Invariant feature dimension of each input node.
    pub h_in: usize,
    /// Number of equivariant 2-D coordinate channels per node.
    pub channels: usize,
    /// Feature embedding width p.
    pub p: usize,
    /// Message width m.
    pub m: usize,
    /// Hidden width of the internal MLPs.
    pub hidden: usize,
    /// Number of message-passing layers L.
    pub layers: usize,
    /// Discrete mode count (0 when the action space is movement only).
    pub n_modes: usize,
    /// Flat-MLP baseline only: fixed entity count and enemy count.
    pub mlp_entities: usize,
    pub mlp_enemies: usize,
    /// Hidden width of the flat MLP baseline.
    pub mlp_hidden: usize,
}

impl NetConfig {
    pub fn graph(kind: NetworkKind, h_in: usize, channels: usize, layers: usize, n_modes: usize) -> Self {
        NetConfig {
            kind,
            h_in,
            channels,
            p: 32,
            m: 32,
            hidden: 32,
            layers,
            n_modes,
            mlp_entities: 0,
            mlp_enemies: 0,
            mlp_hidden: 64,
        }
    }

    pub fn mlp(h_in: usize, channels: usize, entities: usize, enemies: usize, n_modes: usize) -> Self {
        NetConfig {
            kind: NetworkKind::Mlp,
            h_in,
            channels,
            p: 32,
            m: 32,
            hidden: 32,
            layers: 2,
            n_modes,
            mlp_entities: entities,
            mlp_enemies: enemies,
            mlp_hidden: 64,
        }
    }

    fn check(&self) -> Result<(), NetError> {
        let positive = [self.h_in, self.channels, self.p, self.m, self.hidden];
        if positive.iter().any(|&d| d == 0) {
            return Err(NetError::BadConfig(format!("non-positive dimension in {:?}", self)));
        }
        if self.kind == NetworkKind::Mlp && self.mlp_entities == 0 {
            return Err(NetError::BadConfig("mlp baseline needs a fixed entity count".into()));
        }
        Ok(())
    }
}

/// One message-passing layer: message, coordinate-gate, feature MLPs and
/// the E2GN2 scaling MLP.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub phi_e: Mlp,
    pub phi_u: Option<Mlp>,
    pub phi_h: Mlp,
    pub phi_u2: Option<Mlp>,
}

/// All weights of one policy or value network plus the parameter store
/// that owns them.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    pub config: NetConfig,
    pub seed: u64,
    pub store: ParamStore,
    /// Invariant-feature input projection (graph kinds).
    pub input_proj: Option<Mlp>,
    pub layers: Vec<LayerParams>,
    /// Flat trunk for the MLP baseline.
    pub trunk: Option<Mlp>,
    /// Continuous head for kinds whose action mean is not a coordinate
    /// embedding (GNN baseline and flat MLP).
    pub move_head: Option<Mlp>,
    pub mode_head: Option<Mlp>,
    pub target_head: Option<Mlp>,
    pub value_head: Mlp,
    /// State-independent log standard deviation of the movement Gaussian.
    pub log_sigma: ParamId,
}

/// Tape handles for the per-node embeddings after the full forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Embeddings {
    /// (N x p) feature embeddings, or the (1 x hidden) trunk output for
    /// the MLP baseline.
    pub h: ValueId,
    /// (N x 2*channels) coordinate embeddings (EGNN / E2GN2 only).
    pub u: Option<ValueId>,
}

impl NetworkParams {
    pub fn init(config: NetConfig, seed: u64) -> Result<Self, NetError> {
        config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let c = config.channels;

        let mut input_proj = None;
        let mut layers = Vec::new();
        let mut trunk = None;
        let mut move_head = None;
        let mut mode_head = None;
        let mut target_head = None;

        match config.kind {
            NetworkKind::Egnn | NetworkKind::E2gn2 => {
                input_proj = Some(Mlp::init(&mut store, "in_proj", &[config.h_in, config.p], &mut rng));
                for l in 0..config.layers {
                    let phi_e = Mlp::init(
                        &mut store,
                        &format!("layer{}/phi_e", l),
                        &[2 * config.p + c, config.hidden, config.m],
                        &mut rng,
                    );
                    let phi_u = Mlp::init(
                        &mut store,
                        &format!("layer{}/phi_u", l),
                        &[config.m, config.hidden, 1],
                        &mut rng,
                    );
                    let phi_h = Mlp::init(
                        &mut store,
                        &format!("layer{}/phi_h", l),
                        &[config.m + config.p, config.hidden, config.p],
                        &mut rng,
                    );
                    let phi_u2 = if config.kind == NetworkKind::E2gn2 {
                        Some(Mlp::init(
                            &mut store,
                            &format!("layer{}/phi_u2", l),
                            &[config.m, config.hidden, 1],
                            &mut rng,
                        ))
                    } else {
                        None
                    };
                    layers.push(LayerParams { phi_e, phi_u: Some(phi_u), phi_h, phi_u2 });
                }
            }
            NetworkKind::Gnn => {
                // Coordinates fold into the invariant features.
                let h_total = config.h_in + 2 * c;
                input_proj = Some(Mlp::init(&mut store, "in_proj", &[h_total, config.p], &mut rng));
                for l in 0..config.layers {
                    let phi_e = Mlp::init(
                        &mut store,
                        &format!("layer{}/phi_e", l),
                        &[2 * config.p, config.hidden, config.m],
                        &mut rng,
                    );
                    let phi_h = Mlp::init(
                        &mut store,
                        &format!("layer{}/phi_h", l),
                        &[config.m + config.p, config.hidden, config.p],
                        &mut rng,
                    );
                    layers.push(LayerParams { phi_e, phi_u: None, phi_h, phi_u2: None });
                }
                move_head = Some(Mlp::init(&mut store, "move_head", &[config.p, 2], &mut rng));
            }
            NetworkKind::Mlp => {
                let flat = config.mlp_entities * (config.h_in + 2 * c);
                trunk = Some(Mlp::init(
                    &mut store,
                    "trunk",
                    &[flat, config.mlp_hidden, config.mlp_hidden],
                    &mut rng,
                ));
                move_head = Some(Mlp::init(&mut store, "move_head", &[config.mlp_hidden, 2], &mut rng));
                if config.n_modes > 0 {
                    target_head = Some(Mlp::init(
                        &mut store,
                        "target_head",
                        &[config.mlp_hidden, config.mlp_enemies],
                        &mut rng,
                    ));
                }
            }
        }

        let head_in = match config.kind {
            NetworkKind::Mlp => config.mlp_hidden,
            _ => config.p,
        };
        if config.n_modes > 0 {
            mode_head = Some(Mlp::init(&mut store, "mode_head", &[head_in, config.n_modes], &mut rng));
            if config.kind != NetworkKind::Mlp {
                target_head = Some(Mlp::init(&mut store, "target_head", &[config.p, 1], &mut rng));
            }
        }
        let value_head = Mlp::init(&mut store, "value_head", &[head_in, 1], &mut rng);
        let log_sigma = store.add("log_sigma", Array::vector(vec![0.0, 0.0]));

        Ok(NetworkParams {
            config,
            seed,
            store,
            input_proj,
            layers,
            trunk,
            move_head,
            mode_head,
            target_head,
            value_head,
            log_sigma,
        })
    }

    pub fn binder(&self) -> Binder<'_> {
        Binder::new(&self.store)
    }

    /// Full forward pass: input projections then L layers.
    pub fn forward(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        g: &GraphState,
    ) -> Result<Embeddings, NetError> {
        g.validate()?;
        if g.h_dim() != self.config.h_in || g.n_channels() != self.config.channels {
            return Err(NetError::Graph(format!(
                "graph dims ({}, {}) do not match network input ({}, {})",
                g.h_dim(),
                g.n_channels(),
                self.config.h_in,
                self.config.channels
            )));
        }
        match self.config.kind {
            NetworkKind::Egnn | NetworkKind::E2gn2 => self.forward_equivariant(tape, binder, g),
            NetworkKind::Gnn => self.forward_gnn(tape, binder, g),
            NetworkKind::Mlp => self.forward_mlp(tape, binder, g),
        }
    }

    fn node_feature_matrix(&self, tape: &mut Tape, g: &GraphState, with_coords: bool) -> Result<ValueId, AdError> {
        let n = g.n_nodes();
        let mut cols = g.h_dim();
        if with_coords {
            cols += 2 * g.n_channels();
        }
        let mut data = Vec::with_capacity(n * cols);
        for node in &g.nodes {
            data.extend_from_slice(&node.h);
            if with_coords {
                for c in &node.coords {
                    data.push(c[0]);
                    data.push(c[1]);
                }
            }
        }
        tape.constant(Array { shape: vec![n, cols], data })
    }

    fn coord_matrix(&self, tape: &mut Tape, g: &GraphState) -> Result<ValueId, AdError> {
        let n = g.n_nodes();
        let w = 2 * g.n_channels();
        let mut data = Vec::with_capacity(n * w);
        for node in &g.nodes {
            for c in &node.coords {
                data.push(c[0]);
                data.push(c[1]);
            }
        }
        tape.constant(Array { shape: vec![n, w], data })
    }

    /// (2c x c) selector summing coordinate pairs into per-channel scalars.
    fn channel_pair_selector(&self, tape: &mut Tape, c: usize) -> Result<ValueId, AdError> {
        let mut data = vec![0.0; 2 * c * c];
        for k in 0..c {
            data[(2 * k) * c + k] = 1.0;
            data[(2 * k + 1) * c + k] = 1.0;
        }
        tape.constant(Array { shape: vec![2 * c, c], data })
    }

    fn ones_row(&self, tape: &mut Tape, n: usize) -> Result<ValueId, AdError> {
        tape.constant(Array { shape: vec![1, n], data: vec![1.0; n] })
    }

    fn forward_equivariant(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        g: &GraphState,
    ) -> Result<Embeddings, NetError> {
        let n = g.n_nodes();
        let c = g.n_channels();
        let dsts: Vec<usize> = g.edges.iter().map(|e| e.0).collect();
        let srcs: Vec<usize> = g.edges.iter().map(|e| e.1).collect();
        let deg = g.degrees();

        let h_obs = self.node_feature_matrix(tape, g, false)?;
        let mut h = self.input_proj.as_ref().unwrap().forward(tape, binder, h_obs)?;
        let mut u = self.coord_matrix(tape, g)?;

        // C = 1/max(1, deg(i)) tiled over coordinate columns.
        let mut cnorm = Vec::with_capacity(n * 2 * c);
        for i in 0..n {
            let v = 1.0 / (deg[i].max(1) as f64);
            for _ in 0..2 * c {
                cnorm.push(v);
            }
        }
        let cnorm = tape.constant(Array { shape: vec![n, 2 * c], data: cnorm })?;
        let pair_sel = self.channel_pair_selector(tape, c)?;
        let ones_2c = self.ones_row(tape, 2 * c)?;

        for layer in &self.layers {
            if g.edges.is_empty() {
                // No neighbors anywhere: messages are zero vectors.
                let zero_m = tape.constant(Array::zeros(&[n, self.config.m]))?;
                let hm = tape.concat_cols(h, zero_m)?;
                h = layer.phi_h.forward(tape, binder, hm)?;
                if self.config.kind == NetworkKind::E2gn2 {
                    let scale = layer.phi_u2.as_ref().unwrap().forward(tape, binder, zero_m)?;
                    let scale_cols = self.segment_cols(tape, scale, 2 * c)?;
                    u = tape.mul(u, scale_cols)?;
                }
                continue;
            }

            let hi = tape.gather_rows(h, &dsts)?;
            let hj = tape.gather_rows(h, &srcs)?;
            let ui = tape.gather_rows(u, &dsts)?;
            let uj = tape.gather_rows(u, &srcs)?;
            let diff = tape.sub(ui, uj)?;
            let sq = tape.mul(diff, diff)?;
            let dist = tape.matmul(sq, pair_sel)?;

            let msg_in = tape.concat_cols(hi, hj)?;
            let msg_in = tape.concat_cols(msg_in, dist)?;
            let msgs = layer.phi_e.forward(tape, binder, msg_in)?;

            let gate = layer.phi_u.as_ref().unwrap().forward(tape, binder, msgs)?;
            let gate_cols = tape.matmul(gate, ones_2c)?;
            let weighted = tape.mul(diff, gate_cols)?;
            let agg_u = tape.segment_sum_rows(weighted, &dsts, n)?;
            let agg_u = tape.mul(agg_u, cnorm)?;

            let m_i = tape.segment_sum_rows(msgs, &dsts, n)?;

            u = match self.config.kind {
                NetworkKind::E2gn2 => {
                    let scale = layer.phi_u2.as_ref().unwrap().forward(tape, binder, m_i)?;
                    let scale_cols = tape.matmul(scale, ones_2c)?;
                    let scaled = tape.mul(u, scale_cols)?;
                    tape.add(scaled, agg_u)?
                }
                _ => tape.add(u, agg_u)?,
            };

            let hm = tape.concat_cols(h, m_i)?;
            h = layer.phi_h.forward(tape, binder, hm)?;
        }

        Ok(Embeddings { h, u: Some(u) })
    }

    fn segment_cols(&self, tape: &mut Tape, col: ValueId, width: usize) -> Result<ValueId, AdError> {
        let ones = self.ones_row(tape, width)?;
        tape.matmul(col, ones)
    }

    fn forward_gnn(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        g: &GraphState,
    ) -> Result<Embeddings, NetError> {
        let n = g.n_nodes();
        let dsts: Vec<usize> = g.edges.iter().map(|e| e.0).collect();
        let srcs: Vec<usize> = g.edges.iter().map(|e| e.1).collect();

        let x = self.node_feature_matrix(tape, g, true)?;
        let mut h = self.input_proj.as_ref().unwrap().forward(tape, binder, x)?;

        for layer in &self.layers {
            let m_i = if g.edges.is_empty() {
                tape.constant(Array::zeros(&[n, self.config.m]))?
            } else {
                let hi = tape.gather_rows(h, &dsts)?;
                let hj = tape.gather_rows(h, &srcs)?;
                let msg_in = tape.concat_cols(hi, hj)?;
                let msgs = layer.phi_e.forward(tape, binder, msg_in)?;
                tape.segment_sum_rows(msgs, &dsts, n)?
            };
            let hm = tape.concat_cols(h, m_i)?;
            h = layer.phi_h.forward(tape, binder, hm)?;
        }

        Ok(Embeddings { h, u: None })
    }

    fn forward_mlp(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        g: &GraphState,
    ) -> Result<Embeddings, NetError> {
        if g.n_nodes() != self.config.mlp_entities {
            return Err(NetError::Structural {
                head: "trunk".into(),
                detail: format!(
                    "flat mlp built for {} entities cannot evaluate a graph of {}; \
                     retraining is required to change entity count",
                    self.config.mlp_entities,
                    g.n_nodes()
                ),
            });
        }
        let cols = self.config.h_in + 2 * self.config.channels;
        let mut data = Vec::with_capacity(g.n_nodes() * cols);
        for node in &g.nodes {
            data.extend_from_slice(&node.h);
            for c in &node.coords {
                data.push(c[0]);
                data.push(c[1]);
            }
        }
        let flat = tape.constant(Array { shape: vec![1, data.len()], data })?;
        let h = self.trunk.as_ref().unwrap().forward(tape, binder, flat)?;
        Ok(Embeddings { h, u: None })
    }
}
