//! Projection heads for the generative objective.
//!
//! Each view gets a posterior head pair (mu, sigma) mapping representations
//! to a latent space, and a projection head q mapping latents back to the
//! counterpart view's representation space. Sigma heads end in softplus so
//! scales are strictly positive. Hidden layers use the smooth shifted
//! softplus so the reparameterized objective stays differentiable
//! everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, VarId};
use crate::tensor::Tensor;

use super::{init_mlp, mlp_forward_with, Activation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    /// Encoder representation dimension d.
    pub repr_dim: usize,
    /// Latent dimension L; d/2 by default so the projections stay
    /// non-trivial.
    pub latent_dim: usize,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            repr_dim: 64,
            latent_dim: 32,
        }
    }
}

impl HeadConfig {
    pub fn for_repr_dim(d: usize) -> Self {
        HeadConfig {
            repr_dim: d,
            latent_dim: (d / 2).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repr_dim == 0 || self.latent_dim == 0 {
            return Err(Error::Config("heads: dimensions must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which view a head belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadSide {
    X,
    Y,
}

impl HeadSide {
    fn tag(&self) -> &'static str {
        match self {
            HeadSide::X => "x",
            HeadSide::Y => "y",
        }
    }
}

/// Registers the six 2-layer MLPs: mu_x, sigma_x, mu_y, sigma_y (d -> L)
/// and q_x, q_y (L -> d).
pub fn init_heads(
    store: &mut ParamStore,
    prefix: &str,
    cfg: &HeadConfig,
    rng: &mut Rng,
) -> Result<()> {
    cfg.validate()?;
    let (d, l) = (cfg.repr_dim, cfg.latent_dim);
    for side in ["x", "y"] {
        init_mlp(store, &format!("{prefix}.mu_{side}"), d, d, l, rng)?;
        init_mlp(store, &format!("{prefix}.sigma_{side}"), d, d, l, rng)?;
        init_mlp(store, &format!("{prefix}.q_{side}"), l, d, d, rng)?;
    }
    Ok(())
}

/// Posterior parameters for a batch of representations `h [K x d]`:
/// `(mu [K x L], sigma [K x L])` with sigma strictly positive.
pub fn mu_sigma(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    side: HeadSide,
    h: VarId,
) -> Result<(VarId, VarId)> {
    let mu = mlp_forward_with(
        tape,
        store,
        &format!("{prefix}.mu_{}", side.tag()),
        h,
        Activation::ShiftedSoftplus,
    )?;
    let pre = mlp_forward_with(
        tape,
        store,
        &format!("{prefix}.sigma_{}", side.tag()),
        h,
        Activation::ShiftedSoftplus,
    )?;
    let sigma = tape.softplus(pre)?;
    Ok((mu, sigma))
}

/// A reparameterized latent draw: `z = mu + sigma * epsilon` elementwise,
/// with epsilon a frozen standard-normal sample. Gradients flow through mu
/// and sigma only.
#[derive(Clone, Copy, Debug)]
pub struct LatentSample {
    pub z: VarId,
    pub mu: VarId,
    pub sigma: VarId,
    pub epsilon: VarId,
}

/// Draw epsilon from `rng` and build the latent sample for `h [K x d]`.
pub fn reparameterize(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    side: HeadSide,
    h: VarId,
    rng: &mut Rng,
) -> Result<LatentSample> {
    let (mu, sigma) = mu_sigma(tape, store, prefix, side, h)?;
    let shape = tape.value(mu).shape().to_vec();
    let numel: usize = shape.iter().product();
    let eps_data: Vec<f64> = (0..numel).map(|_| rng.normal()).collect();
    let epsilon = tape.leaf(Tensor::new(shape, eps_data)?);
    latent_from_parts(tape, mu, sigma, epsilon)
}

/// As [`reparameterize`] with epsilon pinned to zero, so `z = mu`.
pub fn reparameterize_deterministic(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    side: HeadSide,
    h: VarId,
) -> Result<LatentSample> {
    let (mu, sigma) = mu_sigma(tape, store, prefix, side, h)?;
    let shape = tape.value(mu).shape().to_vec();
    let epsilon = tape.leaf(Tensor::zeros(&shape));
    latent_from_parts(tape, mu, sigma, epsilon)
}

fn latent_from_parts(
    tape: &mut Tape,
    mu: VarId,
    sigma: VarId,
    epsilon: VarId,
) -> Result<LatentSample> {
    let scaled = tape.mul(sigma, epsilon)?;
    let z = tape.add(mu, scaled)?;
    Ok(LatentSample {
        z,
        mu,
        sigma,
        epsilon,
    })
}

/// Project a latent `z [K x L]` into the counterpart representation space.
pub fn project(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    side: HeadSide,
    z: VarId,
) -> Result<VarId> {
    mlp_forward_with(
        tape,
        store,
        &format!("{prefix}.q_{}", side.tag()),
        z,
        Activation::ShiftedSoftplus,
    )
}
