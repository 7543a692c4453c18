use std::collections::BTreeMap;

use super::{Gradients, Graph, Tensor, Var};
use crate::error::{Error, Result};

/// A named, ordered collection of trainable tensors.
///
/// `tag` identifies the set inside a [`Graph`] so gradients from several sets
/// sharing one graph can be routed back to their owners.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    tag: u32,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: BTreeMap<String, usize>,
}

impl ParamSet {
    pub fn new(tag: u32) -> Self {
        ParamSet { tag, names: Vec::new(), tensors: Vec::new(), index: BTreeMap::new() }
    }

    pub fn tag(&self) -> u32 {
        self.tag
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(t);
        self.names.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index_of(name).map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Places every tensor into `g`. Frozen sets enter as constants and can
    /// never receive gradient.
    pub fn bind(&self, g: &mut Graph, frozen: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(i, t)| if frozen { g.constant(t) } else { g.param(self.tag, i, t) })
            .collect()
    }

    /// Adds this set's gradients from `grads` into the tensors' grad buffers.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (i, gr) in grads.params_of(self.tag) {
            let buf = self.tensors[i].grad_mut();
            for (d, s) in buf.iter_mut().zip(gr) {
                *d += s;
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn grad_norm(&self) -> f64 {
        self.tensors.iter().filter_map(Tensor::grad).flat_map(|g| g.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm {
            let s = max_norm / norm;
            for t in &mut self.tensors {
                if let Some(g) = t.grad_mut_opt() {
                    g.iter_mut().for_each(|x| *x *= s);
                }
            }
        }
        norm
    }

    /// Copies parameter values in from `other`, which must have the same layout.
    pub fn copy_values_from(&mut self, other: &ParamSet) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Shape("parameter layouts differ".into()));
        }
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            if dst.shape() != src.shape() {
                return Err(Error::Shape("parameter shapes differ".into()));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }
}
