use std::collections::HashMap;

use crate::{AutodiffError, Gradients, Result, Shape, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug)]
struct Param {
    name: String,
    shape: Shape,
    value: Vec<f64>,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

/// Named learnable tensors with their accumulated gradients and Adam
/// moments.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, ParamId>,
    step: u64,
}

/// Parameters of one store materialized as leaves on a tape.
pub struct Bound<'t> {
    tensors: Vec<Tensor<'t>>,
}

impl<'t> Bound<'t> {
    pub fn get(&self, id: ParamId) -> Tensor<'t> {
        self.tensors[id.0]
    }

    pub fn tensors(&self) -> &[Tensor<'t>] {
        &self.tensors
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on duplicate names or a buffer that does not fit `dims`.
    pub fn add(&mut self, name: impl Into<String>, dims: &[usize], value: Vec<f64>) -> ParamId {
        let name = name.into();
        let shape = Shape::new(dims);
        assert_eq!(value.len(), shape.numel(), "parameter {name}: bad buffer length");
        assert!(!self.index.contains_key(&name), "duplicate parameter name {name}");
        let n = value.len();
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id);
        self.params.push(Param {
            name,
            shape,
            value,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn shape(&self, id: ParamId) -> Shape {
        self.params[id.0].shape
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].grad
    }

    pub fn moments(&self, id: ParamId) -> (&[f64], &[f64]) {
        let p = &self.params[id.0];
        (&p.m, &p.v)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Binds every parameter as a gradient-receiving leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Bound<'t> {
        self.bind_with(tape, true)
    }

    /// Binds every parameter as a constant (frozen network).
    pub fn bind_frozen<'t>(&self, tape: &'t Tape) -> Bound<'t> {
        self.bind_with(tape, false)
    }

    fn bind_with<'t>(&self, tape: &'t Tape, trainable: bool) -> Bound<'t> {
        let tensors = self
            .params
            .iter()
            .map(|p| tape.leaf(p.value.clone(), p.shape, trainable))
            .collect();
        Bound { tensors }
    }

    /// Adds the gradients of the bound leaves into the store's buffers.
    /// Parameters the loss does not reach receive zero.
    pub fn accumulate(&mut self, bound: &Bound<'_>, grads: &Gradients) {
        for (p, t) in self.params.iter_mut().zip(&bound.tensors) {
            if let Some(g) = grads.get(*t) {
                for (a, b) in p.grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales gradients so their global L2 norm is at most `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: f64) {
        let n = self.grad_norm();
        if n > max_norm && n > 0.0 {
            let c = max_norm / n;
            for p in &mut self.params {
                p.grad.iter_mut().for_each(|g| *g *= c);
            }
        }
    }

    /// One bias-corrected Adam update; clears gradients afterwards.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for p in &mut self.params {
            for k in 0..p.value.len() {
                let g = p.grad[k];
                p.m[k] = cfg.beta1 * p.m[k] + (1.0 - cfg.beta1) * g;
                p.v[k] = cfg.beta2 * p.v[k] + (1.0 - cfg.beta2) * g * g;
                let mh = p.m[k] / c1;
                let vh = p.v[k] / c2;
                p.value[k] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
                p.grad[k] = 0.0;
            }
        }
    }

    /// `self ← tau·online + (1 − tau)·self`, elementwise.
    pub fn soft_update_from(&mut self, online: &ParamStore, tau: f64) -> Result<()> {
        self.check_compatible(online)?;
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            for (a, b) in t.value.iter_mut().zip(&o.value) {
                *a = tau * b + (1.0 - tau) * *a;
            }
        }
        Ok(())
    }

    /// Copies values from a structurally identical store.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        self.soft_update_from(other, 1.0)
    }

    fn check_compatible(&self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(AutodiffError::InvalidArgument {
                op: "param_store",
                reason: format!("stores differ in size: {} vs {}", self.params.len(), other.params.len()),
            });
        }
        for (a, b) in self.params.iter().zip(&other.params) {
            if a.shape != b.shape {
                return Err(AutodiffError::ShapeMismatch {
                    op: "param_store",
                    left: a.shape,
                    right: b.shape,
                });
            }
        }
        Ok(())
    }

    /// Squared L2 distance between two structurally identical stores.
    pub fn sq_distance(&self, other: &ParamStore) -> f64 {
        self.params
            .iter()
            .zip(&other.params)
            .flat_map(|(a, b)| a.value.iter().zip(&b.value))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }
}
