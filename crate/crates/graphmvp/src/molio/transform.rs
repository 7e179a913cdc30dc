//! View construction: conformer selection, node masking, centering.

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::{Atom, BondType, Conformer, MoleculeRecord, View3d, ViewPair};

/// Number of nodes to mask: ceil(M * n), computed with a small slack so
/// ratios like 0.3 * 10 (which is 3.0000000000000004 in f64) round to the
/// mathematical value. Any positive M masks at least one node.
pub fn mask_count(m: f64, n: usize) -> usize {
    let k = (m * n as f64 - 1e-9).ceil().max(0.0) as usize;
    k.min(n)
}

/// Mask the same node set in both views. In the 2D view the masked atoms'
/// type and tag become the mask token and every incident bond's type becomes
/// the mask type; in the 3D view the same atoms' types are masked while the
/// coordinates stay. The input record is untouched.
pub fn mask_views(
    record: &MoleculeRecord,
    m: f64,
    conformer: &Conformer,
    rng: &mut Rng,
) -> Result<ViewPair> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Config(format!("masking ratio {m} outside [0, 1]")));
    }
    let n = record.n_atoms();
    let k = mask_count(m, n);
    let masked_indices = rng.sample_distinct(k, n);
    let masked: Vec<bool> = {
        let mut flags = vec![false; n];
        for &i in &masked_indices {
            flags[i] = true;
        }
        flags
    };

    let mut view2d = record.graph.clone();
    for &i in &masked_indices {
        view2d.atoms[i] = Atom::masked();
    }
    for bond in &mut view2d.bonds {
        if masked[bond.i] || masked[bond.j] {
            bond.bond_type = BondType::Mask;
        }
    }

    let mut atoms3d = record.graph.atoms.clone();
    for &i in &masked_indices {
        atoms3d[i].atomic_number = super::MASK_TOKEN;
    }

    Ok(ViewPair {
        view2d,
        view3d: View3d {
            atoms: atoms3d,
            conformer: conformer.clone(),
        },
        masked_indices,
    })
}

/// Uniform draw among the `min(c, available)` highest-weight conformers.
pub fn select_conformer<'a>(
    record: &'a MoleculeRecord,
    c: usize,
    rng: &mut Rng,
) -> Result<&'a Conformer> {
    if c == 0 {
        return Err(Error::Config("conformer count must be >= 1".into()));
    }
    let top = c.min(record.conformers.len());
    Ok(&record.conformers[rng.below(top)])
}

/// Translate so the centroid sits at the origin. Pairwise distances are
/// unchanged, which is all the 3D encoder sees.
pub fn center_coords(conformer: &Conformer) -> Conformer {
    let n = conformer.coords.len() as f64;
    let mut centroid = [0.0; 3];
    for row in &conformer.coords {
        for k in 0..3 {
            centroid[k] += row[k];
        }
    }
    for c in &mut centroid {
        *c /= n;
    }
    Conformer {
        coords: conformer
            .coords
            .iter()
            .map(|row| {
                [
                    row[0] - centroid[0],
                    row[1] - centroid[1],
                    row[2] - centroid[2],
                ]
            })
            .collect(),
        weight: conformer.weight,
    }
}
