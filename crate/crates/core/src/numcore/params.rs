use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use super::checkpoint;
use super::graph::{Gradients, Graph, Var};
use super::tensor::Tensor;
use crate::error::{CoreError, Result};

/// Named trainable tensors, kept in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    entries: Vec<(String, Tensor)>,
    index: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(CoreError::InvalidConfig(alloc::format!(
                "duplicate parameter name `{name}`"
            )));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Places every tensor on `graph` as a tracked leaf.
    pub fn bind(&self, graph: &mut Graph) -> BoundParams {
        let vars = self
            .entries
            .iter()
            .map(|(_, t)| graph.param(t.clone()))
            .collect();
        BoundParams {
            names: self.index.clone(),
            vars,
        }
    }

    /// Binds every tensor as an untracked constant (inference).
    pub fn bind_frozen(&self, graph: &mut Graph) -> BoundParams {
        let vars = self
            .entries
            .iter()
            .map(|(_, t)| graph.constant(t.clone()))
            .collect();
        BoundParams {
            names: self.index.clone(),
            vars,
        }
    }

    /// Hex SHA-256 of the checkpoint encoding.
    pub fn digest(&self) -> String {
        let bytes = checkpoint::encode(self);
        let hash = Sha256::digest(&bytes);
        let mut out = String::with_capacity(64);
        for b in hash {
            out.push(char::from_digit(u32::from(b >> 4), 16).unwrap_or('0'));
            out.push(char::from_digit(u32::from(b & 0xf), 16).unwrap_or('0'));
        }
        out
    }
}

/// Graph handles for the tensors of a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct BoundParams {
    names: BTreeMap<String, usize>,
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.names
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| CoreError::UnknownParameter(name.to_string()))
    }

    /// Pulls the gradient of every bound parameter out of `grads`.
    pub fn collect(&self, grads: &mut Gradients) -> ParamGrads {
        ParamGrads {
            grads: self.vars.iter().map(|&v| grads.take(v)).collect(),
        }
    }
}

/// Per-parameter gradients aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    grads: Vec<Option<Tensor>>,
}

impl ParamGrads {
    pub fn get(&self, i: usize) -> Option<&Tensor> {
        self.grads.get(i).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn zero(&mut self) {
        for t in self.grads.iter_mut().flatten() {
            t.data_mut().fill(0.0);
        }
    }

    /// Gradients in parameter order, `None` where a parameter was unreached.
    pub fn iter(&self) -> impl Iterator<Item = Option<&Tensor>> {
        self.grads.iter().map(Option::as_ref)
    }
}
