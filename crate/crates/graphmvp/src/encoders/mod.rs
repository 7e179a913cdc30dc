//! Encoders for the two molecular views and the projection heads of the
//! generative objective.
//!
//! Parameters live in a [`ParamStore`] under a caller-chosen prefix, so the
//! same forward functions serve pre-training, fine-tuning and probing.

mod gin;
mod heads;
mod schnet;

pub use gin::{gin_forward, init_gin, GinConfig};
pub use heads::{
    init_heads, mu_sigma, project, reparameterize, reparameterize_deterministic, HeadConfig,
    HeadSide, LatentSample,
};
pub use schnet::{init_schnet, rbf_features, schnet_forward, SchNetConfig};

use crate::error::Result;
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, VarId};
use crate::tensor::Tensor;

/// Register a 2-layer MLP under `prefix`.
pub(crate) fn init_mlp(
    store: &mut ParamStore,
    prefix: &str,
    d_in: usize,
    d_hidden: usize,
    d_out: usize,
    rng: &mut Rng,
) -> Result<()> {
    store.init_linear(
        &format!("{prefix}.w1"),
        &format!("{prefix}.b1"),
        d_in,
        d_hidden,
        rng,
    )?;
    store.init_linear(
        &format!("{prefix}.w2"),
        &format!("{prefix}.b2"),
        d_hidden,
        d_out,
        rng,
    )
}

/// Hidden-layer nonlinearity of a 2-layer MLP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Activation {
    Relu,
    /// `ln(0.5 e^x + 0.5)`: smooth, zero at zero; the conventional choice
    /// for continuous-filter networks, whose energies need smooth
    /// derivatives.
    ShiftedSoftplus,
}

/// Apply the 2-layer MLP under `prefix` to the rows of `x`.
pub(crate) fn mlp_forward(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: VarId,
) -> Result<VarId> {
    mlp_forward_with(tape, store, prefix, x, Activation::Relu)
}

pub(crate) fn mlp_forward_with(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: VarId,
    act: Activation,
) -> Result<VarId> {
    let w1 = tape.param(store, &format!("{prefix}.w1"))?;
    let b1 = tape.param(store, &format!("{prefix}.b1"))?;
    let w2 = tape.param(store, &format!("{prefix}.w2"))?;
    let b2 = tape.param(store, &format!("{prefix}.b2"))?;
    let h = tape.matmul(x, w1)?;
    let h = tape.add(h, b1)?;
    let h = match act {
        Activation::Relu => tape.relu(h)?,
        Activation::ShiftedSoftplus => {
            let sp = tape.softplus(h)?;
            tape.add_scalar(sp, -std::f64::consts::LN_2)?
        }
    };
    let o = tape.matmul(h, w2)?;
    tape.add(o, b2)
}

/// One-hot rows for a list of category indices.
pub fn one_hot(indices: &[usize], classes: usize) -> Tensor {
    let mut data = vec![0.0; indices.len() * classes];
    for (row, &c) in indices.iter().enumerate() {
        data[row * classes + c] = 1.0;
    }
    Tensor::new(vec![indices.len(), classes], data).expect("one_hot shape")
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    /// Overwrite the 2-layer MLP under `prefix` with an exact-enough
    /// identity: relu(x + C) - C with C large relative to the inputs.
    pub fn set_identity_mlp(store: &mut ParamStore, prefix: &str, dim: usize) {
        let mut eye = vec![0.0; dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = 1.0;
        }
        const SHIFT: f64 = 1024.0;
        *store.get_mut(&format!("{prefix}.w1")).unwrap() =
            Tensor::new(vec![dim, dim], eye.clone()).unwrap();
        *store.get_mut(&format!("{prefix}.b1")).unwrap() = Tensor::full(&[dim], SHIFT);
        *store.get_mut(&format!("{prefix}.w2")).unwrap() =
            Tensor::new(vec![dim, dim], eye).unwrap();
        *store.get_mut(&format!("{prefix}.b2")).unwrap() = Tensor::full(&[dim], -SHIFT);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_rows() {
        let t = one_hot(&[2, 0], 3);
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_mlp_is_identity_to_1e12() {
        let mut rng = Rng::from_seed(0);
        let mut store = ParamStore::new();
        init_mlp(&mut store, "m", 4, 4, 4, &mut rng).unwrap();
        test_util::set_identity_mlp(&mut store, "m", 4);
        let mut tape = Tape::new();
        let x = tape
            .leaf(Tensor::matrix(2, 4, vec![0.5, -1.25, 3.0, 0.0, 7.5, -2.0, 0.125, 1.0]).unwrap());
        let y = mlp_forward(&mut tape, &store, "m", x).unwrap();
        for (a, b) in tape.value(y).data().iter().zip(tape.value(x).data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
