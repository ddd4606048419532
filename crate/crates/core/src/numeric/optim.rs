use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Plain SGD step: `w ← w − lr·g` for every trainable scalar.
pub fn sgd_step(params: &mut ParamStore, lr: f64) -> Result<()> {
    Sgd::new(lr, None)?.step(params)
}

/// Stochastic gradient descent with optional heavy-ball momentum.
#[derive(Clone, Debug)]
pub struct Sgd {
    lr: f64,
    momentum: Option<f64>,
    velocity: Vec<Option<Tensor>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: Option<f64>) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if let Some(m) = momentum {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::InvalidArgument(format!(
                    "momentum must lie in [0, 1), got {m}"
                )));
            }
        }
        Ok(Self {
            lr,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Applies one update from the gradient slots. Checks every gradient
    /// before touching any value, so a failed step leaves parameters intact.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        for (_, p) in params.iter() {
            if p.trainable && !p.grad.data().iter().all(|g| g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of `{}`", p.name)));
            }
        }
        if self.velocity.len() < params.len() {
            self.velocity.resize(params.len(), None);
        }
        for (p, vel) in params.iter_mut().zip(self.velocity.iter_mut()) {
            if !p.trainable {
                continue;
            }
            match self.momentum {
                None => {
                    for (w, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *w -= self.lr * g;
                    }
                }
                Some(mu) => {
                    let v = vel.get_or_insert_with(|| Tensor::zeros(p.value.shape()));
                    for ((w, vi), g) in p
                        .value
                        .data_mut()
                        .iter_mut()
                        .zip(v.data_mut())
                        .zip(p.grad.data())
                    {
                        *vi = mu * *vi + g;
                        *w -= self.lr * *vi;
                    }
                }
            }
        }
        Ok(())
    }
}
