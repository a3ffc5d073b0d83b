//! Minimal reverse-mode differentiation engine over dense f64 arrays.
//!
//! Forward values are computed eagerly while recording onto a [`Tape`];
//! [`Tape::backward`] walks the recording in reverse to produce exact
//! gradients. Reduction order is fixed left to right so identical inputs
//! give bitwise-identical results.

mod array;
mod tape;

pub use array::Array;
pub use tape::{Gradients, Tape, ValueId};

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {lhs} vs {rhs}")]
    ShapeMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("backward requires a scalar loss, got shape {0}")]
    NotScalar(String),
    #[error("dangling tape reference {0}")]
    DanglingRef(usize),
    #[error("{0}")]
    BadShape(String),
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
}

/// Named parameter bag. Networks hold handles (indices) into one of these;
/// the optimizer and checkpointing see a flat name -> Array view.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array>,
}

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.names.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Array {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array {
        &mut self.values[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.names.iter().zip(self.values.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array)> {
        self.names.iter().zip(self.values.iter_mut())
    }

    pub fn by_name(&self, name: &str) -> Option<&Array> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    /// Total number of scalar entries across all parameters.
    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }
}

/// Caches tape bindings so each parameter becomes exactly one tape input
/// no matter how many times a forward pass touches it.
pub struct Binder<'a> {
    store: &'a ParamStore,
    bound: Vec<Option<ValueId>>,
}

impl<'a> Binder<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Binder { store, bound: vec![None; store.len()] }
    }

    pub fn get(&mut self, tape: &mut Tape, id: ParamId) -> Result<ValueId, AdError> {
        if let Some(v) = self.bound[id.0] {
            return Ok(v);
        }
        let v = tape.input(self.store.name(id), self.store.value(id).clone())?;
        self.bound[id.0] = Some(v);
        Ok(v)
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }
}

/// Max relative error between reverse-mode gradients and central finite
/// differences of `f` over every entry of every parameter in `store`.
///
/// `f` rebuilds the scalar loss on a fresh tape from the current parameter
/// values; it is evaluated once per perturbed entry.
pub fn finite_difference_check(
    store: &mut ParamStore,
    step: f64,
    mut f: impl FnMut(&ParamStore, &mut Tape) -> Result<ValueId, AdError>,
) -> Result<f64, AdError> {
    if !(step > 0.0) {
        return Err(AdError::BadStep(step));
    }
    let mut tape = Tape::new();
    let loss = f(store, &mut tape)?;
    let grads = tape.backward(loss)?;

    let analytic: BTreeMap<String, Array> = grads
        .iter()
        .map(|(n, g)| (n.clone(), g.clone()))
        .collect();

    let mut max_rel = 0.0f64;
    for p in 0..store.len() {
        let id = ParamId(p);
        let n = store.value(id).len();
        let name = store.name(id).to_string();
        for k in 0..n {
            let orig = store.value(id).data[k];

            store.value_mut(id).data[k] = orig + step;
            let mut t_plus = Tape::new();
            let l_plus = f(store, &mut t_plus)?;
            let f_plus = t_plus.value(l_plus).data[0];

            store.value_mut(id).data[k] = orig - step;
            let mut t_minus = Tape::new();
            let l_minus = f(store, &mut t_minus)?;
            let f_minus = t_minus.value(l_minus).data[0];

            store.value_mut(id).data[k] = orig;

            let central = (f_plus - f_minus) / (2.0 * step);
            if !central.is_finite() {
                return Err(AdError::NonFinite("central difference".into()));
            }
            let a = analytic
                .get(&name)
                .map(|g| g.data[k])
                .unwrap_or(0.0);
            let rel = (a - central).abs() / central.abs().max(1.0);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
