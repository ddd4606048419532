use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    /// Frozen parameters still receive gradients but are skipped by optimizers.
    pub trainable: bool,
}

/// Named parameters with paired gradient slots. Insertion order is the
/// canonical order used for serialization and iteration.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter `{name}`"
            )));
        }
        value.ensure_finite(&name)?;
        let id = ParamId(self.params.len());
        let grad = Tensor::zeros(value.shape());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            value,
            grad,
            trainable: true,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    /// Replaces a value, keeping the shape contract.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::dim(
                "set_value",
                format!("{:?}", p.value.shape()),
                format!("{:?}", value.shape()),
            ));
        }
        value.ensure_finite(&p.name)?;
        p.value = value;
        Ok(())
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Adds `grads` into the gradient slots.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (p, g) in self.params.iter_mut().zip(&grads.slots) {
            if let Some(g) = g {
                p.grad.add_assign(g);
            }
        }
    }

    /// Total scalar count across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }
}

/// Per-parameter gradients produced by one backward pass.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    pub(crate) fn with_len(n: usize) -> Self {
        Self {
            slots: vec![None; n],
        }
    }

    pub(crate) fn add_owned(&mut self, id: ParamId, g: Tensor) {
        match &mut self.slots[id.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    /// `None` when the parameter did not take part in the computation.
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.slots.get(id.0).and_then(Option::as_ref)
    }

    /// Sums another gradient set into this one, in parameter order.
    pub fn merge(&mut self, other: Gradients) {
        if self.slots.len() < other.slots.len() {
            self.slots.resize(other.slots.len(), None);
        }
        for (i, g) in other.slots.into_iter().enumerate() {
            if let Some(g) = g {
                self.add_owned(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.slots.iter_mut().flatten() {
            g.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }
}
