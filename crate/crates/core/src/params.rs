//! Named parameter storage, graph binding and the Adam optimizer.

use std::collections::BTreeMap;

use dagr_tensor::{Grads, Graph, RngState, Tensor, Var};

use crate::error::{Error, Result};

/// Parameters keyed by their checkpoint name. Iteration order is the name
/// order, which fixes binding and update order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

/// Graph handles for a [`ParamStore`] bound into one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    /// Handles already in a graph, under the given names.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Var)>) -> Self {
        Self {
            vars: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn extend(&mut self, other: Bound) {
        self.vars.extend(other.vars);
    }

    /// Gradients of the bound leaves, keyed by name. Leaves that did not
    /// contribute to the output get zeros.
    pub fn collect(&self, g: &Graph, grads: &mut Grads) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .map(|(name, &v)| {
                let t = grads
                    .take(v)
                    .unwrap_or_else(|| Tensor::zeros(g.shape(v).to_vec()));
                (name.clone(), t)
            })
            .collect()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.tensors.keys().cloned().collect()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Adds every parameter to `g`, as trainable leaves or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        let vars = self
            .tensors
            .iter()
            .map(|(name, t)| {
                let v = if trainable {
                    g.param(t.clone())
                } else {
                    g.constant(t.clone())
                };
                (name.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    pub fn into_map(self) -> BTreeMap<String, Tensor> {
        self.tensors
    }

    pub fn from_map(tensors: BTreeMap<String, Tensor>) -> Self {
        Self { tensors }
    }

    /// Parameters whose name starts with `prefix`.
    pub fn with_prefix(&self, prefix: &str) -> ParamStore {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// Stable 64-bit FNV-1a hash, used to give every parameter its own RNG stream.
pub fn name_stream(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// He-normal draw with standard deviation `sqrt(2 / fan_in)`.
pub(crate) fn he_normal(shape: &[usize], fan_in: usize, rng: &RngState, name: &str) -> Tensor {
    let mut r = rng.fork(name_stream(name));
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    Tensor::randn(shape.to_vec(), &mut r).map(|v| v * std)
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(
        &mut self,
        store: &mut ParamStore,
        grads: &BTreeMap<String, Tensor>,
        lr: f64,
    ) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, grad) in grads {
            let p = store.get_mut(name)?;
            if p.shape() != grad.shape() {
                return Err(Error::Config(format!(
                    "gradient for {name} has shape {:?}, parameter {:?}",
                    grad.shape(),
                    p.shape()
                )));
            }
            let n = p.numel();
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            for (((w, &g), m), v) in p.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *w -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Cosine annealing from `base_lr` to `min_lr` over `total_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineSchedule {
    pub base_lr: f64,
    pub min_lr: f64,
    pub total_steps: usize,
}

impl CosineSchedule {
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.total_steps <= 1 {
            return self.base_lr;
        }
        let frac = step.min(self.total_steps - 1) as f64 / (self.total_steps - 1) as f64;
        self.min_lr + 0.5 * (self.base_lr - self.min_lr) * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_quadratic() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::from_vec(vec![3.0, -2.0]));
        let mut opt = Adam::new();
        for _ in 0..2000 {
            let mut g = Graph::new();
            let b = store.bind(&mut g, true);
            let w = b.get("w").unwrap();
            let sq = g.square(w).unwrap();
            let loss = g.sum(sq).unwrap();
            let mut grads = g.backward(loss).unwrap();
            let named = b.collect(&g, &mut grads);
            opt.step(&mut store, &named, 0.05).unwrap();
        }
        assert!(store.get("w").unwrap().data().iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::from_vec(vec![1.0]));
        let mut grads = BTreeMap::new();
        grads.insert("w".to_string(), Tensor::from_vec(vec![0.3]));
        Adam::new().step(&mut store, &grads, 0.1).unwrap();
        assert!((store.get("w").unwrap().data()[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn cosine_endpoints() {
        let s = CosineSchedule {
            base_lr: 1.0,
            min_lr: 0.1,
            total_steps: 11,
        };
        assert_eq!(s.lr_at(0), 1.0);
        assert!((s.lr_at(5) - 0.55).abs() < 1e-12);
        assert!((s.lr_at(10) - 0.1).abs() < 1e-12);
        assert!((s.lr_at(50) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn missing_name_is_error() {
        let store = ParamStore::new();
        assert!(matches!(store.get("x"), Err(Error::MissingTensor(_))));
    }
}
