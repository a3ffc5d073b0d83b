use rand::Rng;

use crate::autodiff::{AdError, Array, Binder, ParamId, ParamStore, Tape, ValueId};

/// Weights of one feed-forward network: affine layers with tanh between
/// them and a plain affine output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<(ParamId, ParamId)>,
    pub dims: Vec<usize>,
}

impl Mlp {
    /// Zero-mean uniform weights with fan-in scaling, zero biases.
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        dims: &[usize],
        rng: &mut impl Rng,
    ) -> Self {
        assert!(dims.len() >= 2, "mlp needs at least input and output dims");
        let mut layers = Vec::new();
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = (3.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            let w = store.add(
                format!("{}/w{}", prefix, l),
                Array { shape: vec![fan_in, fan_out], data },
            );
            let b = store.add(format!("{}/b{}", prefix, l), Array::vector(vec![0.0; fan_out]));
            layers.push((w, b));
        }
        Mlp { layers, dims: dims.to_vec() }
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Batched forward: `x` is (rows x in_dim), result (rows x out_dim).
    pub fn forward(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        x: ValueId,
    ) -> Result<ValueId, AdError> {
        let mut cur = x;
        let last = self.layers.len() - 1;
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            let wv = binder.get(tape, w)?;
            let bv = binder.get(tape, b)?;
            let z = tape.matmul(cur, wv)?;
            let z = tape.add_bias_row(z, bv)?;
            cur = if l < last { tape.tanh(z)? } else { z };
        }
        Ok(cur)
    }
}
