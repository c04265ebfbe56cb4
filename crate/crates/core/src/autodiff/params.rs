use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

/// Handle to a parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Which L2 rate applies to a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularized {
    None,
    /// Recurrent and convolutional weights.
    Network,
    /// Trainable embedding tables.
    Embedding,
}

/// Named trainable tensors, in creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    groups: Vec<Regularized>,
    by_name: BTreeMap<String, usize>,
}

impl<T> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
            groups: Vec::new(),
            by_name: BTreeMap::new(),
        }
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor. Panics on a duplicate name, which is a model-building bug.
    pub fn add(&mut self, name: &str, tensor: Tensor<T>, group: Regularized) -> ParamId {
        assert!(!self.by_name.contains_key(name), "duplicate parameter {}", name);
        let id = self.tensors.len();
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        self.groups.push(group);
        self.by_name.insert(name.to_string(), id);
        ParamId(id)
    }

    /// Adds a tensor drawn from Normal(0, 2 / (fan_in + fan_out)).
    pub fn add_glorot(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        group: Regularized,
        rng: &mut Rng,
    ) -> ParamId {
        let std = Float::sqrt(2.0 / (fan_in + fan_out) as f64);
        let normal = Normal::new(0.0, std).expect("finite std");
        let len = shape.iter().product();
        let data = (0..len).map(|_| T::from_f64(normal.sample(rng))).collect();
        self.add(name, Tensor::from_vec(shape, data).expect("shape"), group)
    }

    /// Adds a `rows × cols` matrix whose rows (or columns, whichever are
    /// fewer) are orthonormal.
    pub fn add_orthogonal(&mut self, name: &str, rows: usize, cols: usize, group: Regularized, rng: &mut Rng) -> ParamId {
        let (k, d) = (rows.min(cols), rows.max(cols));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
        while basis.len() < k {
            let mut v: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
            let norm = Float::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if norm > 1e-6 {
                basis.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        let data = (0..rows * cols)
            .map(|i| {
                let (r, c) = (i / cols, i % cols);
                T::from_f64(if rows <= cols { basis[r][c] } else { basis[c][r] })
            })
            .collect();
        self.add(name, Tensor::from_vec(&[rows, cols], data).expect("shape"), group)
    }

    pub fn add_normal(
        &mut self,
        name: &str,
        shape: &[usize],
        std: f64,
        group: Regularized,
        rng: &mut Rng,
    ) -> ParamId {
        let normal = Normal::new(0.0, std).expect("finite std");
        let len = shape.iter().product();
        let data = (0..len).map(|_| T::from_f64(normal.sample(rng))).collect();
        self.add(name, Tensor::from_vec(shape, data).expect("shape"), group)
    }

    pub fn add_filled(&mut self, name: &str, shape: &[usize], value: T, group: Regularized) -> ParamId {
        let len = shape.iter().product();
        self.add(name, Tensor::from_vec(shape, vec![value; len]).expect("shape"), group)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn group(&self, id: ParamId) -> Regularized {
        self.groups[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    /// Total number of scalar weights.
    pub fn size(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Replaces a tensor's values; the shape must match.
    pub fn set(&mut self, id: ParamId, tensor: Tensor<T>) -> bool {
        if self.tensors[id.0].shape() != tensor.shape() {
            return false;
        }
        self.tensors[id.0] = tensor;
        true
    }

    /// Same parameters in another float type.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            groups: self.groups.clone(),
            by_name: self.by_name.clone(),
        }
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    data: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(params: &ParamStore<T>) -> Self {
        Gradients {
            data: params.tensors.iter().map(|t| vec![T::zero(); t.len()]).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[T] {
        &self.data[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.data[id.0]
    }

    pub fn clear(&mut self) {
        for g in &mut self.data {
            g.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, other: &Gradients<T>, scale: T) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + scale * y;
            }
        }
    }

    pub fn l2_norm(&self) -> T {
        self.data
            .iter()
            .flat_map(|g| g.iter())
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt()
    }
}
