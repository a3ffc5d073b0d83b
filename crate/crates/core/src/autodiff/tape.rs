use std::collections::BTreeMap;

use crate::autodiff::{AdError, Array};

pub type ValueId = usize;

/// Recorded primitive. Operand ids always point at earlier tape entries, so
/// replaying the list front to back reproduces the forward pass and walking
/// it back to front accumulates adjoints.
#[derive(Debug, Clone)]
enum Op {
    Input(String),
    Constant,
    MatMul(ValueId, ValueId),
    Add(ValueId, ValueId),
    Sub(ValueId, ValueId),
    Mul(ValueId, ValueId),
    Scale(ValueId, f64),
    AddScalar(ValueId),
    /// Broadcast a length-c bias row over every row of an (r x c) matrix.
    AddBiasRow(ValueId, ValueId),
    SumAxis(ValueId, usize),
    MeanAxis(ValueId, usize),
    SumAll(ValueId),
    MeanAll(ValueId),
    SqNorm(ValueId),
    ConcatCols(ValueId, ValueId),
    Tanh(ValueId),
    Relu(ValueId),
    Exp(ValueId),
    Ln(ValueId),
    SoftmaxRows(ValueId),
    LogSumExpRows(ValueId),
    StackRows(Vec<ValueId>),
    GatherRows(ValueId, Vec<usize>),
    SegmentSumRows(ValueId, Vec<usize>),
    IndexScalar(ValueId, usize),
    Clamp(ValueId, f64, f64),
    MinElem(ValueId, ValueId),
}

struct Node {
    op: Op,
    value: Array,
    /// Whether any tape input is reachable from this node; nodes that
    /// depend only on constants never receive gradient.
    needs: bool,
}

/// Exact reverse-mode gradients keyed by input name.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    map: BTreeMap<String, Array>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Array> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Array, b: &Array) -> AdError {
    AdError::ShapeMismatch {
        op,
        lhs: format!("{:?}", a.shape),
        rhs: format!("{:?}", b.shape),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Array {
        &self.nodes[id].value
    }

    fn check(&self, id: ValueId) -> Result<(), AdError> {
        if id >= self.nodes.len() {
            return Err(AdError::DanglingRef(id));
        }
        Ok(())
    }

    fn push(&mut self, op: Op, value: Array) -> Result<ValueId, AdError> {
        // -1e30 mask sentinels are legal; NaN/Inf are not.
        if !value.all_finite() {
            let name = match &op {
                Op::Input(n) => n.as_str(),
                _ => op_name(&op),
            };
            return Err(AdError::NonFinite(name.to_string()));
        }
        let needs = self.op_needs(&op);
        self.nodes.push(Node { op, value, needs });
        Ok(self.nodes.len() - 1)
    }

    fn op_needs(&self, op: &Op) -> bool {
        let n = |id: &ValueId| self.nodes[*id].needs;
        match op {
            Op::Input(_) => true,
            Op::Constant => false,
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddBiasRow(a, b)
            | Op::ConcatCols(a, b)
            | Op::MinElem(a, b) => n(a) || n(b),
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::SumAxis(a, _)
            | Op::MeanAxis(a, _)
            | Op::SumAll(a)
            | Op::MeanAll(a)
            | Op::SqNorm(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::SoftmaxRows(a)
            | Op::LogSumExpRows(a)
            | Op::GatherRows(a, _)
            | Op::SegmentSumRows(a, _)
            | Op::IndexScalar(a, _)
            | Op::Clamp(a, _, _) => n(a),
            Op::StackRows(ids) => ids.iter().any(n),
        }
    }

    pub fn input(&mut self, name: impl Into<String>, value: Array) -> Result<ValueId, AdError> {
        self.push(Op::Input(name.into()), value)
    }

    pub fn constant(&mut self, value: Array) -> Result<ValueId, AdError> {
        self.push(Op::Constant, value)
    }

    pub fn scalar(&mut self, v: f64) -> Result<ValueId, AdError> {
        self.constant(Array::scalar(v))
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        self.check(a)?;
        self.check(b)?;
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        let (ar, ac) = av.rows_cols();
        let (br, bc) = bv.rows_cols();
        if ac != br {
            return Err(shape_err("matmul", av, bv));
        }
        let mut out = vec![0.0; ar * bc];
        for i in 0..ar {
            for k in 0..ac {
                let aik = av.data[i * ac + k];
                if aik == 0.0 {
                    continue;
                }
                let brow = &bv.data[k * bc..(k + 1) * bc];
                let orow = &mut out[i * bc..(i + 1) * bc];
                for j in 0..bc {
                    orow[j] += aik * brow[j];
                }
            }
        }
        let shape = if av.shape.len() == 1 && bv.shape.len() == 2 {
            vec![bc]
        } else {
            vec![ar, bc]
        };
        self.push(Op::MatMul(a, b), Array { shape, data: out })
    }

    fn binary_elementwise(
        &mut self,
        name: &'static str,
        a: ValueId,
        b: ValueId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<ValueId, AdError> {
        self.check(a)?;
        self.check(b)?;
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        if av.shape != bv.shape {
            return Err(shape_err(name, av, bv));
        }
        let data = av.data.iter().zip(&bv.data).map(|(&x, &y)| f(x, y)).collect();
        let value = Array { shape: av.shape.clone(), data };
        self.push(op, value)
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        self.binary_elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        self.binary_elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        self.binary_elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn min_elem(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        self.binary_elementwise("min", a, b, f64::min, Op::MinElem(a, b))
    }

    fn unary(
        &mut self,
        a: ValueId,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<ValueId, AdError> {
        self.check(a)?;
        let av = &self.nodes[a].value;
        let data = av.data.iter().map(|&x| f(x)).collect();
        let value = Array { shape: av.shape.clone(), data };
        self.push(op, value)
    }

    pub fn scale(&mut self, a: ValueId, c: f64) -> Result<ValueId, AdError> {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: ValueId, c: f64) -> Result<ValueId, AdError> {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn exp(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn ln(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        self.unary(a, f64::ln, Op::Ln(a))
    }

    pub fn clamp(&mut self, a: ValueId, lo: f64, hi: f64) -> Result<ValueId, AdError> {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    pub fn add_bias_row(&mut self, a: ValueId, bias: ValueId) -> Result<ValueId, AdError> {
        self.check(a)?;
        self.check(bias)?;
        let (av, bv) = (&self.nodes[a].value, &self.nodes[bias].value);
        let (r, c) = av.rows_cols();
        if bv.shape.len() != 1 || bv.shape[0] != c {
            return Err(shape_err("add-bias-row", av, bv));
        }
        let mut data = av.data.clone();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] += bv.data[j];
            }
        }
        let value = Array { shape: av.shape.clone(), data };
        self.push(Op::AddBiasRow(a, bias), value)
    }

    pub fn sum_axis(&mut self, a: ValueId, axis: usize) -> Result<ValueId, AdError> {
        self.reduce_axis(a, axis, false)
    }

    pub fn mean_axis(&mut self, a: ValueId, axis: usize) -> Result<ValueId, AdError> {
        self.reduce_axis(a, axis, true)
    }

    fn reduce_axis(&mut self, a: ValueId, axis: usize, mean: bool) -> Result<ValueId, AdError> {
        self.check(a)?;
        let av = &self.nodes[a].value;
        if axis > 1 || (av.shape.len() == 1 && axis != 0) {
            return Err(AdError::BadShape(format!(
                "axis {} out of range for shape {:?}",
                axis, av.shape
            )));
        }
        let (r, c) = av.rows_cols();
        let value = if av.shape.len() == 1 {
            let mut s = 0.0;
            for &x in &av.data {
                s += x;
            }
            if mean {
                s /= av.data.len() as f64;
            }
            Array::scalar(s)
        } else if axis == 0 {
            let mut out = vec![0.0; c];
            for i in 0..r {
                for j in 0..c {
                    out[j] += av.data[i * c + j];
                }
            }
            if mean {
                for v in &mut out {
                    *v /= r as f64;
                }
            }
            Array::vector(out)
        } else {
            let mut out = vec![0.0; r];
            for i in 0..r {
                let mut s = 0.0;
                for j in 0..c {
                    s += av.data[i * c + j];
                }
                out[i] = if mean { s / c as f64 } else { s };
            }
            Array::vector(out)
        };
        let op = if mean { Op::MeanAxis(a, axis) } else { Op::SumAxis(a, axis) };
        self.push(op, value)
    }

    pub fn sum_all(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        self.check(a)?;
        let mut s = 0.0;
        for &x in &self.nodes[a].value.data {
            s += x;
        }
        self.push(Op::SumAll(a), Array::scalar(s))
    }

    pub fn mean_all(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        self.check(a)?;
        let n = self.nodes[a].value.data.len();
        let mut s = 0.0;
        for &x in &self.nodes[a].value.data {
            s += x;
        }
        self.push(Op::MeanAll(a), Array::scalar(s / n as f64))
    }

    pub fn sqnorm(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        self.check(a)?;
        let mut s = 0.0;
        for &x in &self.nodes[a].value.data {
            s += x * x;
        }
        self.push(Op::SqNorm(a), Array::scalar(s))
    }

    /// Concatenate along the last axis: rank-1 vectors end to end, rank-2
    /// matrices column-wise (row counts must match).
    pub fn concat_cols(&mut self, a: ValueId, b: ValueId) -> Result<ValueId, AdError> {
        self.check(a)?;
        self.check(b)?;
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        let value = if av.shape.len() == 1 && bv.shape.len() == 1 {
            let mut data = av.data.clone();
            data.extend_from_slice(&bv.data);
            Array::vector(data)
        } else if av.shape.len() == 2 && bv.shape.len() == 2 && av.shape[0] == bv.shape[0] {
            let (r, ca) = av.rows_cols();
            let cb = bv.shape[1];
            let mut data = Vec::with_capacity(r * (ca + cb));
            for i in 0..r {
                data.extend_from_slice(&av.data[i * ca..(i + 1) * ca]);
                data.extend_from_slice(&bv.data[i * cb..(i + 1) * cb]);
            }
            Array { shape: vec![r, ca + cb], data }
        } else {
            return Err(shape_err("concat", av, bv));
        };
        self.push(Op::ConcatCols(a, b), value)
    }

    pub fn softmax_rows(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        self.check(a)?;
        let av = &self.nodes[a].value;
        let (r, c) = av.rows_cols();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &av.data[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..c {
                let e = (row[j] - m).exp();
                data[i * c + j] = e;
                z += e;
            }
            for j in 0..c {
                data[i * c + j] /= z;
            }
        }
        let value = Array { shape: av.shape.clone(), data };
        self.push(Op::SoftmaxRows(a), value)
    }

    pub fn logsumexp_rows(&mut self, a: ValueId) -> Result<ValueId, AdError> {
        self.check(a)?;
        let av = &self.nodes[a].value;
        let (r, c) = av.rows_cols();
        let mut out = vec![0.0; r];
        for i in 0..r {
            let row = &av.data[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..c {
                z += (row[j] - m).exp();
            }
            out[i] = m + z.ln();
        }
        let value = if av.shape.len() == 1 {
            Array::scalar(out[0])
        } else {
            Array::vector(out)
        };
        self.push(Op::LogSumExpRows(a), value)
    }

    /// Stack rank-1 vectors of equal length into a matrix, one per row.
    pub fn stack_rows(&mut self, rows: &[ValueId]) -> Result<ValueId, AdError> {
        if rows.is_empty() {
            return Err(AdError::BadShape("stack of zero rows".into()));
        }
        for &id in rows {
            self.check(id)?;
        }
        let c = self.nodes[rows[0]].value.data.len();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &id in rows {
            let v = &self.nodes[id].value;
            if v.shape.len() != 1 || v.data.len() != c {
                return Err(AdError::BadShape(format!(
                    "stack rows expect equal-length vectors, got {:?}",
                    v.shape
                )));
            }
            data.extend_from_slice(&v.data);
        }
        let value = Array { shape: vec![rows.len(), c], data };
        self.push(Op::StackRows(rows.to_vec()), value)
    }

    pub fn gather_rows(&mut self, a: ValueId, ids: &[usize]) -> Result<ValueId, AdError> {
        self.check(a)?;
        let av = &self.nodes[a].value;
        let (r, c) = av.rows_cols();
        let mut data = Vec::with_capacity(ids.len() * c);
        for &i in ids {
            if i >= r {
                return Err(AdError::BadShape(format!("gather row {} of {}", i, r)));
            }
            data.extend_from_slice(&av.data[i * c..(i + 1) * c]);
        }
        let value = Array { shape: vec![ids.len(), c], data };
        self.push(Op::GatherRows(a, ids.to_vec()), value)
    }

    /// Sum rows of `a` into `n_segments` output rows keyed by `segments`.
    /// Accumulation order follows the row order of `a`.
    pub fn segment_sum_rows(
        &mut self,
        a: ValueId,
        segments: &[usize],
        n_segments: usize,
    ) -> Result<ValueId, AdError> {
        self.check(a)?;
        let av = &self.nodes[a].value;
        let (r, c) = av.rows_cols();
        if segments.len() != r {
            return Err(AdError::BadShape(format!(
                "{} segment ids for {} rows",
                segments.len(),
                r
            )));
        }
        let mut data = vec![0.0; n_segments * c];
        for (i, &s) in segments.iter().enumerate() {
            if s >= n_segments {
                return Err(AdError::BadShape(format!("segment {} of {}", s, n_segments)));
            }
            for j in 0..c {
                data[s * c + j] += av.data[i * c + j];
            }
        }
        let value = Array { shape: vec![n_segments, c], data };
        self.push(Op::SegmentSumRows(a, segments.to_vec()), value)
    }

    pub fn index_scalar(&mut self, a: ValueId, idx: usize) -> Result<ValueId, AdError> {
        self.check(a)?;
        let av = &self.nodes[a].value;
        if idx >= av.data.len() {
            return Err(AdError::BadShape(format!("index {} of {}", idx, av.data.len())));
        }
        let value = Array::scalar(av.data[idx]);
        self.push(Op::IndexScalar(a, idx), value)
    }

    /// Reverse-mode sweep from a scalar loss. Every input on the tape gets a
    /// gradient; inputs with no path to the loss get zeros.
    pub fn backward(&self, loss: ValueId) -> Result<Gradients, AdError> {
        self.check(loss)?;
        if !self.nodes[loss].value.is_scalar() {
            return Err(AdError::NotScalar(format!("{:?}", self.nodes[loss].value.shape)));
        }
        let mut adj: Vec<Option<Array>> = vec![None; self.nodes.len()];
        adj[loss] = Some(Array::scalar(1.0));

        for id in (0..=loss).rev() {
            let g = match adj[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate(id, &g, &mut adj);
            adj[id] = Some(g);
        }

        let mut map = BTreeMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Input(name) = &node.op {
                let grad = adj[id].take().unwrap_or_else(|| Array::zeros_like(&node.value));
                map.insert(name.clone(), grad);
            }
        }
        Ok(Gradients { map })
    }

    fn bump(
        nodes: &[Node],
        adj: &mut [Option<Array>],
        tgt: ValueId,
        upd: impl FnOnce(&mut Array),
        init: impl FnOnce() -> Array,
    ) {
        if !nodes[tgt].needs {
            return;
        }
        match &mut adj[tgt] {
            Some(a) => upd(a),
            None => {
                let mut a = init();
                upd(&mut a);
                adj[tgt] = Some(a);
            }
        }
    }

    fn accumulate(&self, id: ValueId, g: &Array, adj: &mut Vec<Option<Array>>) {
        let node = &self.nodes[id];
        match &node.op {
            Op::Input(_) | Op::Constant => {}
            Op::MatMul(a, b) => {
                let av = &self.nodes[*a].value;
                let bv = &self.nodes[*b].value;
                let (ar, ac) = av.rows_cols();
                let (_, bc) = bv.rows_cols();
                // dA[i,k] = <g row i, B row k>
                Self::bump(&self.nodes, adj, *a, |da| {
                    for i in 0..ar {
                        let grow = &g.data[i * bc..(i + 1) * bc];
                        let darow = &mut da.data[i * ac..(i + 1) * ac];
                        for k in 0..ac {
                            let brow = &bv.data[k * bc..(k + 1) * bc];
                            let mut acc = 0.0;
                            for j in 0..bc {
                                acc += grow[j] * brow[j];
                            }
                            darow[k] += acc;
                        }
                    }
                }, || Array::zeros_like(av));
                // dB row k += a[i,k] * g row i
                Self::bump(&self.nodes, adj, *b, |db| {
                    for i in 0..ar {
                        let arow = &av.data[i * ac..(i + 1) * ac];
                        let grow = &g.data[i * bc..(i + 1) * bc];
                        for (k, &aik) in arow.iter().enumerate() {
                            if aik == 0.0 {
                                continue;
                            }
                            let dbrow = &mut db.data[k * bc..(k + 1) * bc];
                            for j in 0..bc {
                                dbrow[j] += aik * grow[j];
                            }
                        }
                    }
                }, || Array::zeros_like(bv));
            }
            Op::Add(a, b) => {
                for &t in &[*a, *b] {
                    Self::bump(&self.nodes, adj, t, |d| {
                        for (x, &y) in d.data.iter_mut().zip(&g.data) {
                            *x += y;
                        }
                    }, || Array::zeros_like(g));
                }
            }
            Op::Sub(a, b) => {
                Self::bump(&self.nodes, adj, *a, |d| {
                    for (x, &y) in d.data.iter_mut().zip(&g.data) {
                        *x += y;
                    }
                }, || Array::zeros_like(g));
                Self::bump(&self.nodes, adj, *b, |d| {
                    for (x, &y) in d.data.iter_mut().zip(&g.data) {
                        *x -= y;
                    }
                }, || Array::zeros_like(g));
            }
            Op::Mul(a, b) => {
                let av = self.nodes[*a].value.data.clone();
                let bv = self.nodes[*b].value.data.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..d.data.len() {
                        d.data[i] += g.data[i] * bv[i];
                    }
                }, || Array::zeros_like(g));
                Self::bump(&self.nodes, adj, *b, |d| {
                    for i in 0..d.data.len() {
                        d.data[i] += g.data[i] * av[i];
                    }
                }, || Array::zeros_like(g));
            }
            Op::MinElem(a, b) => {
                let av = self.nodes[*a].value.data.clone();
                let bv = self.nodes[*b].value.data.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..d.data.len() {
                        if av[i] <= bv[i] {
                            d.data[i] += g.data[i];
                        }
                    }
                }, || Array::zeros_like(g));
                Self::bump(&self.nodes, adj, *b, |d| {
                    for i in 0..d.data.len() {
                        if av[i] > bv[i] {
                            d.data[i] += g.data[i];
                        }
                    }
                }, || Array::zeros_like(g));
            }
            Op::Scale(a, c) => {
                let c = *c;
                Self::bump(&self.nodes, adj, *a, |d| {
                    for (x, &y) in d.data.iter_mut().zip(&g.data) {
                        *x += c * y;
                    }
                }, || Array::zeros_like(g));
            }
            Op::AddScalar(a) => {
                Self::bump(&self.nodes, adj, *a, |d| {
                    for (x, &y) in d.data.iter_mut().zip(&g.data) {
                        *x += y;
                    }
                }, || Array::zeros_like(g));
            }
            Op::AddBiasRow(a, bias) => {
                let (r, c) = self.nodes[*a].value.rows_cols();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for (x, &y) in d.data.iter_mut().zip(&g.data) {
                        *x += y;
                    }
                }, || Array::zeros_like(&self.nodes[*a].value));
                Self::bump(&self.nodes, adj, *bias, |d| {
                    for i in 0..r {
                        for j in 0..c {
                            d.data[j] += g.data[i * c + j];
                        }
                    }
                }, || Array::zeros_like(&self.nodes[*bias].value));
            }
            Op::SumAxis(a, axis) | Op::MeanAxis(a, axis) => {
                let av = &self.nodes[*a].value;
                let (r, c) = av.rows_cols();
                let mean = matches!(node.op, Op::MeanAxis(..));
                let rank1 = av.shape.len() == 1;
                let axis = *axis;
                let denom = if !mean {
                    1.0
                } else if rank1 {
                    av.data.len() as f64
                } else if axis == 0 {
                    r as f64
                } else {
                    c as f64
                };
                Self::bump(&self.nodes, adj, *a, |d| {
                    if rank1 {
                        for x in d.data.iter_mut() {
                            *x += g.data[0] / denom;
                        }
                    } else if axis == 0 {
                        for i in 0..r {
                            for j in 0..c {
                                d.data[i * c + j] += g.data[j] / denom;
                            }
                        }
                    } else {
                        for i in 0..r {
                            for j in 0..c {
                                d.data[i * c + j] += g.data[i] / denom;
                            }
                        }
                    }
                }, || Array::zeros_like(av));
            }
            Op::SumAll(a) | Op::MeanAll(a) => {
                let n = self.nodes[*a].value.data.len() as f64;
                let denom = if matches!(node.op, Op::MeanAll(_)) { n } else { 1.0 };
                Self::bump(&self.nodes, adj, *a, |d| {
                    for x in d.data.iter_mut() {
                        *x += g.data[0] / denom;
                    }
                }, || Array::zeros_like(&self.nodes[*a].value));
            }
            Op::SqNorm(a) => {
                let av = self.nodes[*a].value.data.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..d.data.len() {
                        d.data[i] += 2.0 * av[i] * g.data[0];
                    }
                }, || Array::zeros_like(&self.nodes[*a].value));
            }
            Op::ConcatCols(a, b) => {
                let av = &self.nodes[*a].value;
                let bv = &self.nodes[*b].value;
                if av.shape.len() == 1 {
                    let na = av.data.len();
                    Self::bump(&self.nodes, adj, *a, |d| {
                        for i in 0..na {
                            d.data[i] += g.data[i];
                        }
                    }, || Array::zeros_like(av));
                    let nb = bv.data.len();
                    Self::bump(&self.nodes, adj, *b, |d| {
                        for i in 0..nb {
                            d.data[i] += g.data[na + i];
                        }
                    }, || Array::zeros_like(bv));
                } else {
                    let (r, ca) = av.rows_cols();
                    let cb = bv.shape[1];
                    let ct = ca + cb;
                    Self::bump(&self.nodes, adj, *a, |d| {
                        for i in 0..r {
                            for j in 0..ca {
                                d.data[i * ca + j] += g.data[i * ct + j];
                            }
                        }
                    }, || Array::zeros_like(av));
                    Self::bump(&self.nodes, adj, *b, |d| {
                        for i in 0..r {
                            for j in 0..cb {
                                d.data[i * cb + j] += g.data[i * ct + ca + j];
                            }
                        }
                    }, || Array::zeros_like(bv));
                }
            }
            Op::Tanh(a) => {
                let yv = node.value.data.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..d.data.len() {
                        d.data[i] += g.data[i] * (1.0 - yv[i] * yv[i]);
                    }
                }, || Array::zeros_like(&node.value));
            }
            Op::Relu(a) => {
                let xv = self.nodes[*a].value.data.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..d.data.len() {
                        if xv[i] > 0.0 {
                            d.data[i] += g.data[i];
                        }
                    }
                }, || Array::zeros_like(&node.value));
            }
            Op::Exp(a) => {
                let yv = node.value.data.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..d.data.len() {
                        d.data[i] += g.data[i] * yv[i];
                    }
                }, || Array::zeros_like(&node.value));
            }
            Op::Ln(a) => {
                let xv = self.nodes[*a].value.data.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..d.data.len() {
                        d.data[i] += g.data[i] / xv[i];
                    }
                }, || Array::zeros_like(&node.value));
            }
            Op::Clamp(a, lo, hi) => {
                let xv = self.nodes[*a].value.data.clone();
                let (lo, hi) = (*lo, *hi);
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..d.data.len() {
                        if xv[i] > lo && xv[i] < hi {
                            d.data[i] += g.data[i];
                        }
                    }
                }, || Array::zeros_like(&node.value));
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let (r, c) = y.rows_cols();
                let yv = y.data.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..r {
                        let mut dot = 0.0;
                        for j in 0..c {
                            dot += g.data[i * c + j] * yv[i * c + j];
                        }
                        for j in 0..c {
                            d.data[i * c + j] += yv[i * c + j] * (g.data[i * c + j] - dot);
                        }
                    }
                }, || Array::zeros_like(y));
            }
            Op::LogSumExpRows(a) => {
                let av = &self.nodes[*a].value;
                let (r, c) = av.rows_cols();
                // d/dx logsumexp = softmax(x)
                let mut sm = vec![0.0; r * c];
                for i in 0..r {
                    let row = &av.data[i * c..(i + 1) * c];
                    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut z = 0.0;
                    for j in 0..c {
                        let e = (row[j] - m).exp();
                        sm[i * c + j] = e;
                        z += e;
                    }
                    for j in 0..c {
                        sm[i * c + j] /= z;
                    }
                }
                Self::bump(&self.nodes, adj, *a, |d| {
                    for i in 0..r {
                        for j in 0..c {
                            d.data[i * c + j] += g.data[i] * sm[i * c + j];
                        }
                    }
                }, || Array::zeros_like(av));
            }
            Op::StackRows(rows) => {
                let c = self.nodes[rows[0]].value.data.len();
                for (i, &rid) in rows.iter().enumerate() {
                    Self::bump(&self.nodes, adj, rid, |d| {
                        for j in 0..c {
                            d.data[j] += g.data[i * c + j];
                        }
                    }, || Array::zeros_like(&self.nodes[rid].value));
                }
            }
            Op::GatherRows(a, ids) => {
                let (_, c) = self.nodes[*a].value.rows_cols();
                let ids = ids.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for (i, &src) in ids.iter().enumerate() {
                        for j in 0..c {
                            d.data[src * c + j] += g.data[i * c + j];
                        }
                    }
                }, || Array::zeros_like(&self.nodes[*a].value));
            }
            Op::SegmentSumRows(a, segments) => {
                let (_, c) = self.nodes[*a].value.rows_cols();
                let segments = segments.clone();
                Self::bump(&self.nodes, adj, *a, |d| {
                    for (i, &s) in segments.iter().enumerate() {
                        for j in 0..c {
                            d.data[i * c + j] += g.data[s * c + j];
                        }
                    }
                }, || Array::zeros_like(&self.nodes[*a].value));
            }
            Op::IndexScalar(a, idx) => {
                let idx = *idx;
                Self::bump(&self.nodes, adj, *a, |d| {
                    d.data[idx] += g.data[0];
                }, || Array::zeros_like(&self.nodes[*a].value));
            }
        }
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Input(_) => "input",
        Op::Constant => "constant",
        Op::MatMul(..) => "matmul",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::AddScalar(..) => "add-scalar",
        Op::AddBiasRow(..) => "add-bias-row",
        Op::SumAxis(..) => "sum-axis",
        Op::MeanAxis(..) => "mean-axis",
        Op::SumAll(..) => "sum",
        Op::MeanAll(..) => "mean",
        Op::SqNorm(..) => "sqnorm",
        Op::ConcatCols(..) => "concat",
        Op::Tanh(..) => "tanh",
        Op::Relu(..) => "relu",
        Op::Exp(..) => "exp",
        Op::Ln(..) => "ln",
        Op::SoftmaxRows(..) => "softmax",
        Op::LogSumExpRows(..) => "logsumexp",
        Op::StackRows(..) => "stack-rows",
        Op::GatherRows(..) => "gather-rows",
        Op::SegmentSumRows(..) => "segment-sum",
        Op::IndexScalar(..) => "index",
        Op::Clamp(..) => "clamp",
        Op::MinElem(..) => "min",
    }
}
