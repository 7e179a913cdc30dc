//! Named trainable parameters.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// A name -> tensor map with stable lexicographic iteration order, so every
/// run touches parameters in the same sequence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    map: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        if self.map.contains_key(name) {
            return Err(Error::Invariant(format!("duplicate parameter `{name}`")));
        }
        self.map.insert(name.to_string(), tensor.with_grad());
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.map.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    /// Lexicographic by name.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.map.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn total_entries(&self) -> usize {
        self.map.values().map(|t| t.numel()).sum()
    }

    /// Copy every parameter under `prefix` from `other` (names kept).
    pub fn adopt(&mut self, other: &ParamStore, prefix: &str) -> Result<()> {
        for (name, tensor) in other.iter() {
            if name.starts_with(prefix) {
                self.insert(name, tensor.clone())?;
            }
        }
        Ok(())
    }

    /// Weight matrix initialized uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)),
    /// bias initialized to zero.
    pub fn init_linear(
        &mut self,
        w_name: &str,
        b_name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut Rng,
    ) -> Result<()> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        self.insert(w_name, Tensor::uniform(&[fan_in, fan_out], bound, rng))?;
        self.insert(b_name, Tensor::zeros(&[fan_out]))
    }

    /// Embedding table, one row per vocabulary entry; fan-in taken as the
    /// embedding dimension.
    pub fn init_embedding(
        &mut self,
        name: &str,
        vocab: usize,
        dim: usize,
        rng: &mut Rng,
    ) -> Result<()> {
        let bound = 1.0 / (dim as f64).sqrt();
        self.insert(name, Tensor::uniform(&[vocab, dim], bound, rng))
    }
}
