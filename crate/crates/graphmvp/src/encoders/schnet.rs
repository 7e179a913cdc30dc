//! 3D encoder: continuous-filter convolutions over interatomic distances.
//!
//! The filter for an atom pair at distance r is the radial basis expansion
//! `e_k(r) = exp(-gamma (r - mu_k)^2)` over B centers evenly spaced on
//! [0, cutoff], mixed by a learned linear map into feature space:
//!
//! ```text
//! z_i^(0)   = embedding(x_i)
//! z_i^(t+1) = MLP( sum_j z_j^(t) * W e(||r_i - r_j||) )     (pairs within cutoff)
//! h_i       = MLP(z_i^(K))
//! ```
//!
//! The graph representation is the sum over atom-wise `h_i`, which keeps the
//! readout size-sensitive, complementing the 2D encoder's mean. Everything
//! depends on coordinates only through pairwise distances, so the output is
//! invariant under rigid motions and reflections of the conformer. The MLPs
//! use the shifted softplus `ln(0.5 e^x + 0.5)`, the smooth nonlinearity
//! conventional for this architecture.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molio::{distance, Atom, MAX_ATOMIC_NUMBER};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, VarId};
use crate::tensor::Tensor;

use super::{init_mlp, mlp_forward_with, Activation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchNetConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    /// Number of radial basis centers.
    pub rbf_count: usize,
    /// Basis width, in inverse square angstroms.
    pub gamma: f64,
    /// Pairs farther apart contribute nothing, in angstroms.
    pub cutoff: f64,
    /// Atom-type embedding rows; index 0 is the mask token.
    pub atom_vocab: usize,
}

impl Default for SchNetConfig {
    fn default() -> Self {
        SchNetConfig {
            num_layers: 3,
            hidden_dim: 64,
            rbf_count: 16,
            gamma: 10.0,
            cutoff: 8.0,
            atom_vocab: MAX_ATOMIC_NUMBER as usize + 1,
        }
    }
}

impl SchNetConfig {
    /// Centers evenly spaced on [0, cutoff], endpoints included.
    pub fn rbf_centers(&self) -> Vec<f64> {
        let b = self.rbf_count;
        if b == 1 {
            return vec![0.0];
        }
        (0..b)
            .map(|k| self.cutoff * k as f64 / (b - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.rbf_count == 0 {
            return Err(Error::Config(
                "schnet: num_layers, hidden_dim and rbf_count must be >= 1".into(),
            ));
        }
        if self.gamma <= 0.0 || self.gamma.is_nan() {
            return Err(Error::Config(format!(
                "schnet: gamma {} must be > 0",
                self.gamma
            )));
        }
        if self.cutoff <= 0.0 || self.cutoff.is_nan() {
            return Err(Error::Config(format!(
                "schnet: cutoff {} must be > 0",
                self.cutoff
            )));
        }
        if self.atom_vocab < 2 {
            return Err(Error::Config(
                "schnet: atom_vocab must include a mask row".into(),
            ));
        }
        let centers = self.rbf_centers();
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "schnet: rbf centers must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

pub fn init_schnet(
    store: &mut ParamStore,
    prefix: &str,
    cfg: &SchNetConfig,
    rng: &mut Rng,
) -> Result<()> {
    cfg.validate()?;
    let d = cfg.hidden_dim;
    store.init_embedding(&format!("{prefix}.embed"), cfg.atom_vocab, d, rng)?;
    for k in 0..cfg.num_layers {
        let bound = 1.0 / (cfg.rbf_count as f64).sqrt();
        store.insert(
            &format!("{prefix}.layer{k}.filter.w"),
            Tensor::uniform(&[cfg.rbf_count, d], bound, rng),
        )?;
        init_mlp(store, &format!("{prefix}.layer{k}.update"), d, d, d, rng)?;
    }
    init_mlp(store, &format!("{prefix}.out"), d, d, d, rng)?;
    Ok(())
}

/// Radial basis expansion of one distance.
pub fn rbf_features(cfg: &SchNetConfig, r: f64) -> Vec<f64> {
    cfg.rbf_centers()
        .iter()
        .map(|mu| (-cfg.gamma * (r - mu) * (r - mu)).exp())
        .collect()
}

/// Returns the graph representation `[d]`.
pub fn schnet_forward(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    cfg: &SchNetConfig,
    atoms: &[Atom],
    coords: &[[f64; 3]],
) -> Result<VarId> {
    let n = atoms.len();
    if n == 0 {
        return Err(Error::Invariant(
            "schnet_forward on an empty molecule".into(),
        ));
    }
    if coords.len() != n {
        return Err(Error::Shape(format!(
            "{} coordinate rows for {n} atoms",
            coords.len()
        )));
    }
    if coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("non-finite coordinates".into()));
    }
    let mut idx = Vec::with_capacity(n);
    for atom in atoms {
        let z = atom.atomic_number as usize;
        if z >= cfg.atom_vocab {
            return Err(Error::Index(format!(
                "atom type {z} outside vocabulary of {}",
                cfg.atom_vocab
            )));
        }
        idx.push(z);
    }

    // Pair list within the cutoff. The self pair (distance 0) is included,
    // which keeps a lone atom's output a function of its own embedding.
    let mut src = Vec::new();
    let mut dst = Vec::new();
    let mut rbf_rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let r = distance(&coords[i], &coords[j]);
            if r <= cfg.cutoff {
                src.push(j);
                dst.push(i);
                rbf_rows.extend(rbf_features(cfg, r));
            }
        }
    }
    let pairs = src.len();
    let rbf = tape.leaf(Tensor::new(vec![pairs, cfg.rbf_count], rbf_rows)?);

    let embed = tape.param(store, &format!("{prefix}.embed"))?;
    let mut z = tape.gather_rows(embed, &idx)?;

    for k in 0..cfg.num_layers {
        let filter_w = tape.param(store, &format!("{prefix}.layer{k}.filter.w"))?;
        let filters = tape.matmul(rbf, filter_w)?;
        let z_src = tape.gather_rows(z, &src)?;
        let messages = tape.mul(z_src, filters)?;
        let agg = tape.scatter_add_rows(messages, &dst, n)?;
        z = mlp_forward_with(
            tape,
            store,
            &format!("{prefix}.layer{k}.update"),
            agg,
            Activation::ShiftedSoftplus,
        )?;
    }

    let h_atoms = mlp_forward_with(
        tape,
        store,
        &format!("{prefix}.out"),
        z,
        Activation::ShiftedSoftplus,
    )?;
    tape.sum(h_atoms, Some(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molio::random_rotation;

    fn small_cfg() -> SchNetConfig {
        SchNetConfig {
            num_layers: 2,
            hidden_dim: 8,
            rbf_count: 8,
            gamma: 10.0,
            cutoff: 8.0,
            atom_vocab: 10,
        }
    }

    fn init(cfg: &SchNetConfig, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = Rng::from_seed(seed);
        init_schnet(&mut store, "sch", cfg, &mut rng).unwrap();
        store
    }

    fn forward(
        cfg: &SchNetConfig,
        store: &ParamStore,
        atoms: &[Atom],
        coords: &[[f64; 3]],
    ) -> Vec<f64> {
        let mut tape = Tape::new();
        let h = schnet_forward(&mut tape, store, "sch", cfg, atoms, coords).unwrap();
        tape.value(h).data().to_vec()
    }

    #[test]
    fn rbf_peaks_at_its_center() {
        let cfg = small_cfg();
        let centers = cfg.rbf_centers();
        for (k, &mu) in centers.iter().enumerate() {
            let feats = rbf_features(&cfg, mu);
            assert!((feats[k] - 1.0).abs() < 1e-15, "basis {k} at its center");
        }
    }

    #[test]
    fn centers_are_evenly_spaced() {
        let cfg = small_cfg();
        let centers = cfg.rbf_centers();
        assert_eq!(centers[0], 0.0);
        assert_eq!(*centers.last().unwrap(), cfg.cutoff);
        let step = centers[1] - centers[0];
        for w in centers.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-12);
        }
    }

    #[test]
    fn single_atom_depends_only_on_embedding() {
        let cfg = small_cfg();
        let store = init(&cfg, 1);
        let carbon = forward(&cfg, &store, &[Atom::new(6, 0)], &[[0.0, 0.0, 0.0]]);
        // Moving the atom changes nothing; no pair terms beyond the self pair.
        let moved = forward(&cfg, &store, &[Atom::new(6, 0)], &[[3.0, -2.0, 1.0]]);
        assert_eq!(carbon, moved);
        // A different species gives a different output.
        let oxygen = forward(&cfg, &store, &[Atom::new(8, 0)], &[[0.0, 0.0, 0.0]]);
        assert_ne!(carbon, oxygen);
    }

    #[test]
    fn rigid_motion_invariance() {
        let cfg = small_cfg();
        let store = init(&cfg, 2);
        let mut rng = Rng::from_seed(55);
        let n = 7;
        let atoms: Vec<Atom> = (0..n)
            .map(|_| Atom::new(1 + rng.below(8) as u8, 0))
            .collect();
        let coords: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.normal() * 2.0, rng.normal() * 2.0, rng.normal() * 2.0])
            .collect();
        let base = forward(&cfg, &store, &atoms, &coords);
        for _ in 0..30 {
            let q = random_rotation(&mut rng);
            let t = [rng.normal() * 5.0, rng.normal() * 5.0, rng.normal() * 5.0];
            let moved: Vec<[f64; 3]> = coords
                .iter()
                .map(|p| {
                    [
                        q[0][0] * p[0] + q[0][1] * p[1] + q[0][2] * p[2] + t[0],
                        q[1][0] * p[0] + q[1][1] * p[1] + q[1][2] * p[2] + t[1],
                        q[2][0] * p[0] + q[2][1] * p[1] + q[2][2] * p[2] + t[2],
                    ]
                })
                .collect();
            let out = forward(&cfg, &store, &atoms, &moved);
            for (a, b) in base.iter().zip(&out) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn atom_permutation_invariance() {
        let cfg = small_cfg();
        let store = init(&cfg, 3);
        let mut rng = Rng::from_seed(66);
        let n = 6;
        let atoms: Vec<Atom> = (0..n)
            .map(|_| Atom::new(1 + rng.below(8) as u8, 0))
            .collect();
        let coords: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.normal(), rng.normal(), rng.normal()])
            .collect();
        let base = forward(&cfg, &store, &atoms, &coords);
        for _ in 0..20 {
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            let p_atoms: Vec<Atom> = perm.iter().map(|&i| atoms[i]).collect();
            let p_coords: Vec<[f64; 3]> = perm.iter().map(|&i| coords[i]).collect();
            let out = forward(&cfg, &store, &p_atoms, &p_coords);
            for (a, b) in base.iter().zip(&out) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn beyond_cutoff_contributes_nothing() {
        let cfg = small_cfg();
        let store = init(&cfg, 4);
        let atoms = [Atom::new(6, 0), Atom::new(8, 0)];
        // Two atoms far beyond the cutoff behave like two isolated atoms.
        let far = forward(&cfg, &store, &atoms, &[[0.0, 0.0, 0.0], [100.0, 0.0, 0.0]]);
        let a = forward(&cfg, &store, &atoms[..1], &[[0.0, 0.0, 0.0]]);
        let b = forward(&cfg, &store, &atoms[1..], &[[0.0, 0.0, 0.0]]);
        for i in 0..far.len() {
            assert!((far[i] - (a[i] + b[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_coordinates_rejected() {
        let cfg = small_cfg();
        let store = init(&cfg, 5);
        let mut tape = Tape::new();
        let err = schnet_forward(
            &mut tape,
            &store,
            "sch",
            &cfg,
            &[Atom::new(6, 0)],
            &[[f64::NAN, 0.0, 0.0]],
        );
        assert!(err.is_err());
    }
}
