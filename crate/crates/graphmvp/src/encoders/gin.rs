//! 2D encoder: graph isomorphism network over atoms and bonds.
//!
//! Layer update for node i:
//!
//! ```text
//! z_i^(k+1) = MLP_atom^(k+1)( z_i^(k) + sum_{j in N(i)} ( z_j^(k) + MLP_bond^(k+1)(E_ij) ) )
//! ```
//!
//! with `z^(0)` the sum of the per-channel atom embeddings. The graph
//! representation is the mean of the last layer's node representations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molio::{Molecule2D, BOND_VOCAB, MAX_ATOMIC_NUMBER};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, VarId};
use crate::tensor::Tensor;

use super::{init_mlp, mlp_forward, one_hot};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GinConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    /// Atom-type embedding rows; index 0 is the mask token, indices 1..=118
    /// the elements.
    pub atom_vocab: usize,
    /// Tag embedding rows; index 0 is the mask token, tag t maps to t + 1.
    pub tag_vocab: usize,
    /// Bond-type embedding rows including the mask type.
    pub bond_vocab: usize,
}

impl Default for GinConfig {
    fn default() -> Self {
        GinConfig {
            num_layers: 3,
            hidden_dim: 64,
            atom_vocab: MAX_ATOMIC_NUMBER as usize + 1,
            tag_vocab: 8,
            bond_vocab: BOND_VOCAB,
        }
    }
}

impl GinConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::Config(
                "gin: num_layers and hidden_dim must be >= 1".into(),
            ));
        }
        if self.atom_vocab < 2 || self.tag_vocab < 2 || self.bond_vocab < 2 {
            return Err(Error::Config(
                "gin: every vocabulary needs a mask row plus at least one real entry".into(),
            ));
        }
        Ok(())
    }
}

pub fn init_gin(
    store: &mut ParamStore,
    prefix: &str,
    cfg: &GinConfig,
    rng: &mut Rng,
) -> Result<()> {
    cfg.validate()?;
    let d = cfg.hidden_dim;
    store.init_embedding(&format!("{prefix}.embed_z"), cfg.atom_vocab, d, rng)?;
    store.init_embedding(&format!("{prefix}.embed_tag"), cfg.tag_vocab, d, rng)?;
    for k in 0..cfg.num_layers {
        init_mlp(store, &format!("{prefix}.layer{k}.atom"), d, d, d, rng)?;
        init_mlp(
            store,
            &format!("{prefix}.layer{k}.bond"),
            cfg.bond_vocab,
            d,
            d,
            rng,
        )?;
    }
    Ok(())
}

/// Returns `(node_reprs [n x d], graph_repr [d])`.
pub fn gin_forward(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    cfg: &GinConfig,
    mol: &Molecule2D,
) -> Result<(VarId, VarId)> {
    let n = mol.n_atoms();
    if n == 0 {
        return Err(Error::Invariant("gin_forward on an empty molecule".into()));
    }
    let mut idx_z = Vec::with_capacity(n);
    let mut idx_tag = Vec::with_capacity(n);
    for atom in &mol.atoms {
        let z = atom.atomic_number as usize;
        if z >= cfg.atom_vocab {
            return Err(Error::Index(format!(
                "atom type {z} outside vocabulary of {}",
                cfg.atom_vocab
            )));
        }
        idx_z.push(z);
        let t = if atom.is_masked() {
            0
        } else {
            atom.tag as usize + 1
        };
        if t >= cfg.tag_vocab {
            return Err(Error::Index(format!(
                "atom tag {} outside vocabulary of {}",
                atom.tag, cfg.tag_vocab
            )));
        }
        idx_tag.push(t);
    }

    let embed_z = tape.param(store, &format!("{prefix}.embed_z"))?;
    let embed_tag = tape.param(store, &format!("{prefix}.embed_tag"))?;
    let ez = tape.gather_rows(embed_z, &idx_z)?;
    let et = tape.gather_rows(embed_tag, &idx_tag)?;
    let mut z = tape.add(ez, et)?;

    let (src, dst, kinds) = mol.directed_edges();
    let bond_idx: Vec<usize> = kinds.iter().map(|k| k.embedding_index()).collect();

    for k in 0..cfg.num_layers {
        let agg = if src.is_empty() {
            tape.leaf(Tensor::zeros(&[n, cfg.hidden_dim]))
        } else {
            let onehot = tape.leaf(one_hot(&bond_idx, cfg.bond_vocab));
            let bond_feat = mlp_forward(tape, store, &format!("{prefix}.layer{k}.bond"), onehot)?;
            let z_src = tape.gather_rows(z, &src)?;
            let messages = tape.add(z_src, bond_feat)?;
            tape.scatter_add_rows(messages, &dst, n)?
        };
        let pre = tape.add(z, agg)?;
        z = mlp_forward(tape, store, &format!("{prefix}.layer{k}.atom"), pre)?;
    }

    let graph = tape.mean(z, Some(0))?;
    Ok((z, graph))
}
