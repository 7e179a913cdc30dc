//! Mutual-information benchmark on correlated Gaussians.
//!
//! Pairs `(u, v)` with `v = rho u + sqrt(1 - rho^2) w` have analytic mutual
//! information `-(dim/2) ln(1 - rho^2)` nats. Two small MLP critics are
//! trained with the softmax contrastive loss on fresh batches; the
//! x-anchored bound `ln K - loss` is tracked every step and can never
//! exceed `ln K`.

use serde::{Deserialize, Serialize};

use crate::encoders::{init_mlp, mlp_forward};
use crate::error::{Error, Result};
use crate::objectives::{infonce, mi_estimate_infonce, BatchReprs};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::Tape;
use crate::tensor::Tensor;
use crate::trainer::AdamState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiBenchConfig {
    pub rho: f64,
    pub dim: usize,
    /// Batch size K; the bound saturates at ln K.
    pub batch: usize,
    pub steps: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for MiBenchConfig {
    fn default() -> Self {
        MiBenchConfig {
            rho: 0.8,
            dim: 1,
            batch: 128,
            steps: 2000,
            hidden: 32,
            out_dim: 8,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl MiBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho.abs() < 1.0) {
            return Err(Error::Config(format!(
                "mi-bench: |rho| must be < 1, got {}",
                self.rho
            )));
        }
        if self.dim == 0 || self.hidden == 0 || self.out_dim == 0 {
            return Err(Error::Config("mi-bench: dimensions must be >= 1".into()));
        }
        if self.batch < 2 {
            return Err(Error::Config("mi-bench: batch must be >= 2".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("mi-bench: steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn true_mi(&self) -> f64 {
        -(self.dim as f64 / 2.0) * (1.0 - self.rho * self.rho).ln()
    }
}

#[derive(Clone, Debug)]
pub struct MiBenchOutcome {
    /// Mean per-step estimate over the final window (steps/20, at least 1).
    pub estimate: f64,
    pub true_mi: f64,
    pub log_k: f64,
    /// Estimate at every training step, for bound checks.
    pub per_step: Vec<f64>,
}

impl MiBenchOutcome {
    pub fn max_step_estimate(&self) -> f64 {
        self.per_step
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn mi_bench(cfg: &MiBenchConfig) -> Result<MiBenchOutcome> {
    cfg.validate()?;
    let mut params = ParamStore::new();
    let mut init_rng = Rng::derive(cfg.seed, 0x4d495f49, 0); // "MI_I"
    init_mlp(
        &mut params,
        "critic_x",
        cfg.dim,
        cfg.hidden,
        cfg.out_dim,
        &mut init_rng,
    )?;
    init_mlp(
        &mut params,
        "critic_y",
        cfg.dim,
        cfg.hidden,
        cfg.out_dim,
        &mut init_rng,
    )?;
    let mut adam = AdamState::new(cfg.lr, &params);

    let k = cfg.batch;
    let scale = (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut per_step = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps as u64 {
        let mut rng = Rng::derive(cfg.seed, 0x4d495f53, step); // "MI_S"
        let mut u = Vec::with_capacity(k * cfg.dim);
        let mut v = Vec::with_capacity(k * cfg.dim);
        for _ in 0..k * cfg.dim {
            let a = rng.normal();
            let b = rng.normal();
            u.push(a);
            v.push(cfg.rho * a + scale * b);
        }
        let mut tape = Tape::new();
        let xu = tape.leaf(Tensor::new(vec![k, cfg.dim], u)?);
        let xv = tape.leaf(Tensor::new(vec![k, cfg.dim], v)?);
        let hx = mlp_forward(&mut tape, &params, "critic_x", xu)?;
        let hy = mlp_forward(&mut tape, &params, "critic_y", xv)?;
        per_step.push(mi_estimate_infonce(tape.value(hx), tape.value(hy))?);

        let loss = infonce(&mut tape, &BatchReprs { hx, hy })?;
        let grads = tape.backward(loss, &params)?;
        adam.step(&mut params, &grads)?;
    }

    let window = (cfg.steps / 20).max(1);
    let estimate = per_step[cfg.steps - window..].iter().sum::<f64>() / window as f64;
    Ok(MiBenchOutcome {
        estimate,
        true_mi: cfg.true_mi(),
        log_k: (k as f64).ln(),
        per_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_mi_formula() {
        let cfg = MiBenchConfig {
            rho: 0.8,
            dim: 1,
            ..MiBenchConfig::default()
        };
        assert!((cfg.true_mi() - 0.5108256237659907).abs() < 1e-12);
        let cfg4 = MiBenchConfig {
            rho: 0.5,
            dim: 4,
            ..MiBenchConfig::default()
        };
        assert!((cfg4.true_mi() - (-2.0 * 0.75f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn uncorrelated_estimate_stays_near_zero() {
        let cfg = MiBenchConfig {
            rho: 0.0,
            steps: 300,
            batch: 64,
            seed: 5,
            ..MiBenchConfig::default()
        };
        let out = mi_bench(&cfg).unwrap();
        assert!(out.estimate.abs() < 0.05, "estimate {}", out.estimate);
        assert!(out.max_step_estimate() <= out.log_k + 1e-12);
    }

    #[test]
    fn correlated_estimate_rises_toward_truth() {
        // Short run: should clear zero decisively and respect the bound;
        // the full-tolerance run lives in the acceptance suite.
        let cfg = MiBenchConfig {
            steps: 400,
            seed: 1,
            ..MiBenchConfig::default()
        };
        let out = mi_bench(&cfg).unwrap();
        assert!(out.estimate > 0.2, "estimate {}", out.estimate);
        assert!(out.estimate < out.log_k);
        assert!(out.max_step_estimate() <= out.log_k + 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = MiBenchConfig {
            steps: 50,
            batch: 32,
            ..MiBenchConfig::default()
        };
        let a = mi_bench(&cfg).unwrap();
        let b = mi_bench(&cfg).unwrap();
        assert_eq!(a.per_step, b.per_step);
    }
}
