//! Adam with bias correction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tape::Gradients;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Completed steps; bias correction uses t after increment.
    pub t: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl AdamState {
    /// Zero moments for every parameter; beta1 0.9, beta2 0.999, eps 1e-8.
    pub fn new(lr: f64, params: &ParamStore) -> Self {
        let moments = params
            .iter()
            .map(|(name, t)| {
                (
                    name.clone(),
                    (Tensor::zeros(t.shape()), Tensor::zeros(t.shape())),
                )
            })
            .collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments,
        }
    }

    pub(crate) fn from_parts(
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        t: u64,
        moments: BTreeMap<String, (Tensor, Tensor)>,
    ) -> Self {
        AdamState {
            lr,
            beta1,
            beta2,
            eps,
            t,
            moments,
        }
    }

    pub(crate) fn moments(&self) -> &BTreeMap<String, (Tensor, Tensor)> {
        &self.moments
    }

    /// One update:
    /// `m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;`
    /// `theta <- theta - lr * mhat / (sqrt(vhat) + eps)`.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) -> Result<()> {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, param) in params.iter_mut() {
            let grad = grads
                .get(name)
                .ok_or_else(|| Error::Train(format!("missing gradient for `{name}`")))?;
            if !grad.all_finite() {
                return Err(Error::NonFinite(format!("gradient for `{name}`")));
            }
            let (m, v) = self
                .moments
                .get_mut(name)
                .ok_or_else(|| Error::Train(format!("missing optimizer state for `{name}`")))?;
            let g = grad.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            let pd = param.data_mut();
            for i in 0..g.len() {
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * g[i];
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                if !pd[i].is_finite() {
                    return Err(Error::NonFinite(format!("parameter `{name}` after update")));
                }
            }
        }
        Ok(())
    }
}
