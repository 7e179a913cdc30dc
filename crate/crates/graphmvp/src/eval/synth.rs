//! Synthetic molecular datasets with geometry-derived labels.
//!
//! Topologies are chains (zig-zag layout, 1.5 A bonds), rings (regular
//! polygons) and branched trees (random 3D growth), plus seeded Gaussian
//! coordinate noise. Every record carries two recomputable labels derived
//! from its top-weight conformer:
//!
//! - a 3D-diameter class: the maximum pairwise distance, bucketed by
//!   quartile edges computed over the generated set and recorded in the
//!   dataset header;
//! - a long-range-contact flag: 1 iff some atom pair is at least 4 bonds
//!   apart in the graph but within 2.5 A in space.
//!
//! Chains and rings are geometrically extended, so contacts come almost
//! entirely from folded branched trees; the mixed kind balances the two
//! regimes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molio::{
    distance, Atom, Bond, BondType, Conformer, DatasetHeader, Molecule2D, MoleculeRecord,
};
use crate::rng::Rng;

/// Graph separation and Euclidean proximity that count as a long-range
/// contact.
pub const CONTACT_GRAPH_DISTANCE: usize = 4;
pub const CONTACT_EUCLIDEAN: f64 = 2.5;
/// Number of diameter classes.
pub const DIAMETER_CLASSES: usize = 4;

const BOND_LENGTH: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Chain,
    Ring,
    Branched,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub count: usize,
    pub atoms_min: usize,
    pub atoms_max: usize,
    /// Gaussian coordinate noise, in angstroms.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            kind: SynthKind::Mixed,
            count: 2000,
            atoms_min: 6,
            atoms_max: 16,
            noise: 0.1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("synth: count must be >= 1".into()));
        }
        if self.atoms_min < 3 || self.atoms_max < self.atoms_min {
            return Err(Error::Config(format!(
                "synth: atom range [{}, {}] invalid (min 3 for rings)",
                self.atoms_min, self.atoms_max
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!(
                "synth: noise {} invalid",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Which geometry-derived label lands in the record's `label` field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthTask {
    Diameter,
    Contact,
}

impl SynthTask {
    pub fn as_str(&self) -> &'static str {
        match self {
            SynthTask::Diameter => "diameter",
            SynthTask::Contact => "contact",
        }
    }
}

/// A generated molecule with both labels still explicit.
#[derive(Clone, Debug)]
pub struct SynthRecord {
    pub record: MoleculeRecord,
    /// Max pairwise distance in the top-weight conformer.
    pub diameter: f64,
    pub contact: bool,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub records: Vec<SynthRecord>,
    /// Ascending quartile cut points over the generated diameters.
    pub diameter_edges: Vec<f64>,
    pub spec: SynthSpec,
}

/// Class of a diameter given the header's edges: the number of edges
/// strictly below it.
pub fn diameter_class(edges: &[f64], diameter: f64) -> usize {
    edges.iter().filter(|&&e| diameter > e).count()
}

/// The contact flag recomputed from a record's stored graph and top-weight
/// conformer.
pub fn contact_flag(record: &MoleculeRecord) -> bool {
    let conformer = &record.conformers[0];
    let n = record.n_atoms();
    for i in 0..n {
        let hops = record.graph.bfs_distances(i);
        for j in (i + 1)..n {
            if let Some(h) = hops[j] {
                if h >= CONTACT_GRAPH_DISTANCE
                    && distance(&conformer.coords[i], &conformer.coords[j]) <= CONTACT_EUCLIDEAN
                {
                    return true;
                }
            }
        }
    }
    false
}

fn concrete_kind(kind: SynthKind, rng: &mut Rng) -> SynthKind {
    match kind {
        SynthKind::Mixed => [SynthKind::Chain, SynthKind::Ring, SynthKind::Branched][rng.below(3)],
        k => k,
    }
}

fn draw_atom_type(rng: &mut Rng) -> u8 {
    // Carbon-heavy palette of common elements.
    if rng.below(2) == 0 {
        6
    } else {
        [1u8, 7, 8, 9, 16][rng.below(5)]
    }
}

fn chain_layout(n: usize) -> Vec<[f64; 3]> {
    // Zig-zag with tetrahedral-like angle; consecutive atoms 1.5 A apart.
    let half_angle = 109.47_f64.to_radians() / 2.0;
    let dx = BOND_LENGTH * half_angle.sin();
    let dy = BOND_LENGTH * half_angle.cos();
    (0..n)
        .map(|k| [k as f64 * dx, (k % 2) as f64 * dy, 0.0])
        .collect()
}

fn ring_layout(n: usize) -> Vec<[f64; 3]> {
    let radius = BOND_LENGTH / (2.0 * (std::f64::consts::PI / n as f64).sin());
    (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [radius * theta.cos(), radius * theta.sin(), 0.0]
        })
        .collect()
}

fn branched_layout(parents: &[usize], rng: &mut Rng) -> Vec<[f64; 3]> {
    let n = parents.len() + 1;
    let mut coords = vec![[0.0; 3]; n];
    for (k, &parent) in parents.iter().enumerate() {
        let node = k + 1;
        // Uniform random growth direction; folded shapes are the point.
        let dir = loop {
            let v = [rng.normal(), rng.normal(), rng.normal()];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if norm > 1e-9 {
                break [v[0] / norm, v[1] / norm, v[2] / norm];
            }
        };
        coords[node] = [
            coords[parent][0] + BOND_LENGTH * dir[0],
            coords[parent][1] + BOND_LENGTH * dir[1],
            coords[parent][2] + BOND_LENGTH * dir[2],
        ];
    }
    coords
}

fn chain_bond_type(rng: &mut Rng) -> BondType {
    match rng.below(10) {
        0..=6 => BondType::Single,
        7..=8 => BondType::Double,
        _ => BondType::Triple,
    }
}

pub fn gen_synthetic(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut records = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let mut rng = Rng::derive(spec.seed, 0x53594e54, i as u64); // "SYNT"
        records.push(gen_record(spec, i, &mut rng)?);
    }

    let mut diameters: Vec<f64> = records.iter().map(|r| r.diameter).collect();
    diameters.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = diameters.len();
    let edges: Vec<f64> = (1..DIAMETER_CLASSES)
        .map(|q| diameters[(n * q / DIAMETER_CLASSES).min(n - 1)])
        .collect();

    Ok(SynthOutput {
        records,
        diameter_edges: edges,
        spec: spec.clone(),
    })
}

fn gen_record(spec: &SynthSpec, index: usize, rng: &mut Rng) -> Result<SynthRecord> {
    let kind = concrete_kind(spec.kind, rng);
    let n = spec.atoms_min + rng.below(spec.atoms_max - spec.atoms_min + 1);

    let (bonds, parents) = match kind {
        SynthKind::Chain => {
            let bonds: Vec<Bond> = (1..n)
                .map(|k| Bond::new(k - 1, k, chain_bond_type(rng)))
                .collect::<Result<_>>()?;
            (bonds, None)
        }
        SynthKind::Ring => {
            let aromatic = rng.below(2) == 0;
            let bt = if aromatic {
                BondType::Aromatic
            } else {
                BondType::Single
            };
            let mut bonds: Vec<Bond> = (1..n)
                .map(|k| Bond::new(k - 1, k, bt))
                .collect::<Result<_>>()?;
            bonds.push(Bond::new(0, n - 1, bt)?);
            (bonds, None)
        }
        SynthKind::Branched => {
            let parents: Vec<usize> = (1..n).map(|k| rng.below(k)).collect();
            let bonds: Vec<Bond> = parents
                .iter()
                .enumerate()
                .map(|(k, &p)| Bond::new(p, k + 1, chain_bond_type(rng)))
                .collect::<Result<_>>()?;
            (bonds, Some(parents))
        }
        SynthKind::Mixed => unreachable!("resolved above"),
    };

    let atoms: Vec<Atom> = {
        let mut degree = vec![0u32; n];
        for b in &bonds {
            degree[b.i] += 1;
            degree[b.j] += 1;
        }
        (0..n)
            .map(|k| Atom::new(draw_atom_type(rng), degree[k].min(3)))
            .collect()
    };

    let n_conformers = 1 + rng.below(3);
    let mut raw_weights = Vec::with_capacity(n_conformers);
    let mut conformers = Vec::with_capacity(n_conformers);
    for _ in 0..n_conformers {
        let mut coords = match kind {
            SynthKind::Chain => chain_layout(n),
            SynthKind::Ring => ring_layout(n),
            SynthKind::Branched => branched_layout(parents.as_ref().unwrap(), rng),
            SynthKind::Mixed => unreachable!(),
        };
        for row in coords.iter_mut() {
            for c in row.iter_mut() {
                *c += spec.noise * rng.normal();
            }
        }
        raw_weights.push(rng.normal());
        conformers.push(Conformer {
            coords,
            weight: 0.0,
        });
    }
    // Softmax-normalized occurrence weights.
    let max_w = raw_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let exp_sum: f64 = raw_weights.iter().map(|w| (w - max_w).exp()).sum();
    for (conf, w) in conformers.iter_mut().zip(&raw_weights) {
        conf.weight = (w - max_w).exp() / exp_sum;
    }

    let record = MoleculeRecord::new(
        format!("synth-{index}"),
        Molecule2D { atoms, bonds },
        conformers,
        None,
    )?;
    let diameter = record.conformers[0].max_pairwise_distance();
    let contact = contact_flag(&record);
    Ok(SynthRecord {
        record,
        diameter,
        contact,
    })
}

impl SynthOutput {
    /// Records labeled for one task, plus the dataset header carrying the
    /// class edges and generator settings.
    pub fn labeled(&self, task: SynthTask) -> (DatasetHeader, Vec<MoleculeRecord>) {
        let header = DatasetHeader {
            task: Some(task.as_str().to_string()),
            diameter_edges: Some(self.diameter_edges.clone()),
            generator: serde_json::to_value(&self.spec).ok(),
        };
        let records = self
            .records
            .iter()
            .map(|sr| {
                let mut record = sr.record.clone();
                record.label = Some(match task {
                    SynthTask::Diameter => diameter_class(&self.diameter_edges, sr.diameter) as f64,
                    SynthTask::Contact => f64::from(sr.contact),
                });
                record
            })
            .collect();
        (header, records)
    }

    pub fn contact_rate(&self) -> f64 {
        self.records.iter().filter(|r| r.contact).count() as f64 / self.records.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molio::{load_dataset, write_jsonl, ParseMode};

    #[test]
    fn chain_2d_diameter_is_n_minus_1() {
        let spec = SynthSpec {
            kind: SynthKind::Chain,
            count: 20,
            ..SynthSpec::default()
        };
        let out = gen_synthetic(&spec).unwrap();
        for sr in &out.records {
            let n = sr.record.n_atoms();
            assert_eq!(sr.record.graph.graph_diameter(), n - 1);
        }
    }

    #[test]
    fn noiseless_even_ring_diameter_matches_polygon_geometry() {
        let spec = SynthSpec {
            kind: SynthKind::Ring,
            count: 40,
            noise: 0.0,
            atoms_min: 4,
            atoms_max: 12,
            ..SynthSpec::default()
        };
        let out = gen_synthetic(&spec).unwrap();
        let mut checked = 0;
        for sr in &out.records {
            let n = sr.record.n_atoms();
            if n % 2 == 0 {
                let expect = BOND_LENGTH / (std::f64::consts::PI / n as f64).sin();
                assert!(
                    (sr.diameter - expect).abs() < 1e-9,
                    "n={n}: {} vs {expect}",
                    sr.diameter
                );
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn same_seed_gives_byte_identical_files() {
        let spec = SynthSpec {
            count: 25,
            ..SynthSpec::default()
        };
        let dir = std::env::temp_dir();
        let write = |name: &str| {
            let out = gen_synthetic(&spec).unwrap();
            let (header, records) = out.labeled(SynthTask::Diameter);
            let path = dir.join(name);
            write_jsonl(&path, Some(&header), &records).unwrap();
            std::fs::read(&path).unwrap()
        };
        assert_eq!(write("synth-det-a.jsonl"), write("synth-det-b.jsonl"));
    }

    #[test]
    fn labels_recomputable_from_stored_geometry() {
        let spec = SynthSpec {
            count: 60,
            ..SynthSpec::default()
        };
        let out = gen_synthetic(&spec).unwrap();
        let dir = std::env::temp_dir();

        for task in [SynthTask::Diameter, SynthTask::Contact] {
            let (header, records) = out.labeled(task);
            let path = dir.join(format!("synth-recompute-{}.jsonl", task.as_str()));
            write_jsonl(&path, Some(&header), &records).unwrap();
            let dataset = load_dataset(&path, ParseMode::Strict).unwrap();
            let edges = dataset
                .header
                .as_ref()
                .unwrap()
                .diameter_edges
                .clone()
                .unwrap();
            for record in &dataset.records {
                let want = match task {
                    SynthTask::Diameter => {
                        diameter_class(&edges, record.conformers[0].max_pairwise_distance()) as f64
                    }
                    SynthTask::Contact => f64::from(contact_flag(record)),
                };
                assert_eq!(record.label, Some(want), "record {}", record.id);
            }
        }
    }

    #[test]
    fn diameter_classes_are_roughly_balanced() {
        let spec = SynthSpec {
            count: 400,
            ..SynthSpec::default()
        };
        let out = gen_synthetic(&spec).unwrap();
        let mut counts = [0usize; DIAMETER_CLASSES];
        for sr in &out.records {
            counts[diameter_class(&out.diameter_edges, sr.diameter)] += 1;
        }
        for (class, &c) in counts.iter().enumerate() {
            let frac = c as f64 / 400.0;
            assert!(
                (0.1..=0.45).contains(&frac),
                "class {class} holds {frac:.2} of the data ({counts:?})"
            );
        }
    }

    #[test]
    fn mixed_contact_rate_in_target_band() {
        let spec = SynthSpec {
            count: 500,
            ..SynthSpec::default()
        };
        let out = gen_synthetic(&spec).unwrap();
        let rate = out.contact_rate();
        assert!((0.1..=0.5).contains(&rate), "contact rate {rate}");
    }

    #[test]
    fn chains_and_rings_stay_extended() {
        for kind in [SynthKind::Chain, SynthKind::Ring] {
            let spec = SynthSpec {
                kind,
                count: 100,
                ..SynthSpec::default()
            };
            let out = gen_synthetic(&spec).unwrap();
            assert!(
                out.contact_rate() < 0.05,
                "{kind:?} contact rate {}",
                out.contact_rate()
            );
        }
    }
}
