//! Named parameter storage and Adam updates.

use std::collections::BTreeMap;

use crate::error::{Result, TensorError};
use crate::ndarray::NdArray;
use crate::tape::{NodeId, Tape};

/// Adam hyperparameters. `lr` is set by the caller each run; the moment
/// decay rates and epsilon keep their conventional defaults.
#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        AdamHyper { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub value: NdArray,
    pub m: NdArray,
    pub v: NdArray,
    pub step: u64,
}

/// All trainable parameters of a model, keyed by name. Iteration order is
/// the sorted name order, which checkpointing and update loops rely on for
/// determinism.
#[derive(Debug, Default, Clone)]
pub struct ParameterStore {
    entries: BTreeMap<String, ParamEntry>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: NdArray) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(TensorError::DuplicateParam { name: name.to_string() });
        }
        let m = NdArray::zeros(value.shape());
        let v = NdArray::zeros(value.shape());
        self.entries.insert(name.to_string(), ParamEntry { value, m, v, step: 0 });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&NdArray> {
        self.entries.get(name).map(|e| &e.value)
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.get(name)
    }

    /// Overwrite a parameter's value, keeping moments and step (used by
    /// tests that plant specific weights).
    pub fn assign(&mut self, name: &str, value: NdArray) -> Result<()> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| TensorError::UnknownParam { name: name.to_string() })?;
        if entry.value.shape() != value.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "assign",
                lhs: entry.value.shape().to_vec(),
                rhs: value.shape().to_vec(),
            });
        }
        entry.value = value;
        Ok(())
    }

    /// Replace a full entry (used by checkpoint restore).
    pub fn restore(&mut self, name: &str, entry: ParamEntry) {
        self.entries.insert(name.to_string(), entry);
    }

    /// Record the parameter on a tape as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape, name: &str) -> Result<NodeId> {
        let value = self
            .get(name)
            .ok_or_else(|| TensorError::UnknownParam { name: name.to_string() })?;
        Ok(tape.param(name, value.clone()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.entries.values().map(|e| e.value.numel()).sum()
    }

    /// One Adam step with bias correction. Parameters without a gradient
    /// entry are left untouched; gradients naming an unknown parameter or
    /// carrying the wrong shape are rejected.
    pub fn adam_step(&mut self, grads: &BTreeMap<String, NdArray>, hyper: AdamHyper) -> Result<()> {
        for (name, grad) in grads {
            let entry = self
                .entries
                .get_mut(name)
                .ok_or_else(|| TensorError::UnknownParam { name: name.clone() })?;
            if entry.value.shape() != grad.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    lhs: entry.value.shape().to_vec(),
                    rhs: grad.shape().to_vec(),
                });
            }
            entry.step += 1;
            let t = entry.step as f64;
            let bc1 = 1.0 - hyper.beta1.powf(t);
            let bc2 = 1.0 - hyper.beta2.powf(t);
            let g = grad.data();
            let m = entry.m.data_mut();
            for (mi, &gi) in m.iter_mut().zip(g) {
                *mi = hyper.beta1 * *mi + (1.0 - hyper.beta1) * gi;
            }
            let v = entry.v.data_mut();
            for (vi, &gi) in v.iter_mut().zip(g) {
                *vi = hyper.beta2 * *vi + (1.0 - hyper.beta2) * gi * gi;
            }
            let (m, v) = (entry.m.data(), entry.v.data());
            let w = entry.value.data_mut();
            for i in 0..w.len() {
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
            }
        }
        Ok(())
    }
}
