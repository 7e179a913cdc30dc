//! Molecular data model: a 2D bond graph plus weighted 3D conformers per
//! molecule, the JSONL on-disk format, and the paired-view masking
//! transform used for pre-training.

mod jsonl;
mod transform;

pub use jsonl::{load_dataset, parse_jsonl, write_jsonl, Dataset, DatasetHeader, ParseMode};
pub use transform::{center_coords, mask_count, mask_views, select_conformer};

use crate::error::{Error, Result};

/// Reserved sentinel for a masked atom type / tag.
pub const MASK_TOKEN: u8 = 0;
pub const MAX_ATOMIC_NUMBER: u8 = 118;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Atom {
    /// 1..=118, or 0 for the mask token.
    pub atomic_number: u8,
    /// Auxiliary categorical feature (e.g. a degree bucket).
    pub tag: u32,
}

impl Atom {
    pub fn new(atomic_number: u8, tag: u32) -> Self {
        Atom { atomic_number, tag }
    }

    pub fn is_masked(&self) -> bool {
        self.atomic_number == MASK_TOKEN
    }

    pub fn masked() -> Self {
        Atom {
            atomic_number: MASK_TOKEN,
            tag: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondType {
    Single,
    Double,
    Triple,
    Aromatic,
    Mask,
}

impl BondType {
    pub fn as_str(&self) -> &'static str {
        match self {
            BondType::Single => "single",
            BondType::Double => "double",
            BondType::Triple => "triple",
            BondType::Aromatic => "aromatic",
            BondType::Mask => "mask",
        }
    }

    /// Wire names only; the mask type never appears in a dataset file.
    pub fn from_wire(s: &str) -> Option<Self> {
        match s {
            "single" => Some(BondType::Single),
            "double" => Some(BondType::Double),
            "triple" => Some(BondType::Triple),
            "aromatic" => Some(BondType::Aromatic),
            _ => None,
        }
    }

    /// Row in the bond embedding table; the mask token gets the last row.
    pub fn embedding_index(&self) -> usize {
        match self {
            BondType::Single => 0,
            BondType::Double => 1,
            BondType::Triple => 2,
            BondType::Aromatic => 3,
            BondType::Mask => 4,
        }
    }
}

/// Number of bond-type embedding rows including the mask token.
pub const BOND_VOCAB: usize = 5;

/// Undirected bond, stored once with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub bond_type: BondType,
}

impl Bond {
    pub fn new(i: usize, j: usize, bond_type: BondType) -> Result<Self> {
        if i == j {
            return Err(Error::Invariant(format!("self-bond at atom {i}")));
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        Ok(Bond { i, j, bond_type })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Molecule2D {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

impl Molecule2D {
    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn validate(&self) -> Result<()> {
        for atom in &self.atoms {
            if atom.atomic_number > MAX_ATOMIC_NUMBER {
                return Err(Error::Invariant(format!(
                    "atomic number {} out of range",
                    atom.atomic_number
                )));
            }
        }
        let n = self.atoms.len();
        let mut seen = std::collections::HashSet::new();
        for bond in &self.bonds {
            if bond.i == bond.j {
                return Err(Error::Invariant(format!("self-bond at atom {}", bond.i)));
            }
            if bond.i > bond.j {
                return Err(Error::Invariant(format!(
                    "bond ({}, {}) not stored with i < j",
                    bond.i, bond.j
                )));
            }
            if bond.j >= n {
                return Err(Error::Invariant(format!(
                    "bond ({}, {}) references a missing atom (n = {n})",
                    bond.i, bond.j
                )));
            }
            if !seen.insert((bond.i, bond.j)) {
                return Err(Error::Invariant(format!(
                    "duplicate bond ({}, {})",
                    bond.i, bond.j
                )));
            }
        }
        Ok(())
    }

    /// Both directions of every bond: parallel (src, dst, bond) columns.
    pub fn directed_edges(&self) -> (Vec<usize>, Vec<usize>, Vec<BondType>) {
        let m = self.bonds.len() * 2;
        let mut src = Vec::with_capacity(m);
        let mut dst = Vec::with_capacity(m);
        let mut kind = Vec::with_capacity(m);
        for bond in &self.bonds {
            src.push(bond.i);
            dst.push(bond.j);
            kind.push(bond.bond_type);
            src.push(bond.j);
            dst.push(bond.i);
            kind.push(bond.bond_type);
        }
        (src, dst, kind)
    }

    /// BFS hop counts from `start`; `None` for unreachable atoms.
    pub fn bfs_distances(&self, start: usize) -> Vec<Option<usize>> {
        let n = self.atoms.len();
        let mut adj = vec![Vec::new(); n];
        for bond in &self.bonds {
            adj[bond.i].push(bond.j);
            adj[bond.j].push(bond.i);
        }
        let mut dist = vec![None; n];
        let mut queue = std::collections::VecDeque::new();
        dist[start] = Some(0);
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Longest shortest path over all reachable pairs.
    pub fn graph_diameter(&self) -> usize {
        (0..self.atoms.len())
            .flat_map(|s| self.bfs_distances(s).into_iter().flatten())
            .max()
            .unwrap_or(0)
    }
}

/// One 3D arrangement of the owning molecule's atoms, in angstroms, with a
/// non-negative occurrence weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Conformer {
    pub coords: Vec<[f64; 3]>,
    pub weight: f64,
}

impl Conformer {
    pub fn max_pairwise_distance(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.coords.len() {
            for j in (i + 1)..self.coords.len() {
                best = best.max(distance(&self.coords[i], &self.coords[j]));
            }
        }
        best
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Random orthogonal 3x3 matrix (rotation or roto-reflection) via
/// Gram-Schmidt on Gaussian vectors.
pub fn random_rotation(rng: &mut crate::rng::Rng) -> [[f64; 3]; 3] {
    loop {
        let mut v: Vec<[f64; 3]> = (0..3)
            .map(|_| [rng.normal(), rng.normal(), rng.normal()])
            .collect();
        let mut ok = true;
        for i in 0..3 {
            for j in 0..i {
                let dot: f64 = (0..3).map(|k| v[i][k] * v[j][k]).sum();
                for k in 0..3 {
                    v[i][k] -= dot * v[j][k];
                }
            }
            let norm: f64 = v[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for k in 0..3 {
                v[i][k] /= norm;
            }
        }
        if ok {
            return [v[0], v[1], v[2]];
        }
    }
}

/// Apply `q * p + t` to every coordinate row.
pub fn transform_coords(coords: &[[f64; 3]], q: &[[f64; 3]; 3], t: &[f64; 3]) -> Vec<[f64; 3]> {
    coords
        .iter()
        .map(|p| {
            [
                q[0][0] * p[0] + q[0][1] * p[1] + q[0][2] * p[2] + t[0],
                q[1][0] * p[0] + q[1][1] * p[1] + q[1][2] * p[2] + t[1],
                q[2][0] * p[0] + q[2][1] * p[1] + q[2][2] * p[2] + t[2],
            ]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeRecord {
    pub id: String,
    pub graph: Molecule2D,
    /// Sorted descending by weight, ties keeping input order.
    pub conformers: Vec<Conformer>,
    pub label: Option<f64>,
}

impl MoleculeRecord {
    /// Validates all invariants and normalizes conformer order.
    pub fn new(
        id: String,
        graph: Molecule2D,
        mut conformers: Vec<Conformer>,
        label: Option<f64>,
    ) -> Result<Self> {
        graph.validate().map_err(|e| tag_record(&id, e))?;
        if conformers.is_empty() {
            return Err(Error::Invariant(format!(
                "record `{id}`: needs at least one conformer"
            )));
        }
        for (c_idx, conf) in conformers.iter().enumerate() {
            if conf.coords.len() != graph.n_atoms() {
                return Err(Error::Invariant(format!(
                    "record `{id}`: conformer {c_idx} has {} coordinate rows for {} atoms",
                    conf.coords.len(),
                    graph.n_atoms()
                )));
            }
            if !conf.weight.is_finite() || conf.weight < 0.0 {
                return Err(Error::Invariant(format!(
                    "record `{id}`: conformer {c_idx} weight {} invalid",
                    conf.weight
                )));
            }
            if conf.coords.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Invariant(format!(
                    "record `{id}`: conformer {c_idx} has non-finite coordinates"
                )));
            }
        }
        // Stable sort: equal weights keep input order.
        conformers.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap());
        Ok(MoleculeRecord {
            id,
            graph,
            conformers,
            label,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.graph.n_atoms()
    }
}

fn tag_record(id: &str, err: Error) -> Error {
    match err {
        Error::Invariant(msg) => Error::Invariant(format!("record `{id}`: {msg}")),
        other => other,
    }
}

/// 3D side of a masked view pair: atoms with types masked, coordinates
/// untouched.
#[derive(Clone, Debug, PartialEq)]
pub struct View3d {
    pub atoms: Vec<Atom>,
    pub conformer: Conformer,
}

/// The two masked views of one molecule. The same node set is masked in
/// both.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewPair {
    pub view2d: Molecule2D,
    pub view3d: View3d,
    /// Sorted ascending.
    pub masked_indices: Vec<usize>,
}
