//! The view transform: pick a conformer, mask the same node set in the 2D
//! and 3D views, and inspect what each encoder will see.
//!
//! ```bash
//! cargo run --release --example masked_views
//! ```

use graphmvp::eval::{gen_synthetic, SynthKind, SynthSpec};
use graphmvp::molio::{center_coords, mask_count, mask_views, select_conformer};
use graphmvp::rng::Rng;

fn main() -> graphmvp::Result<()> {
    let spec = SynthSpec {
        kind: SynthKind::Branched,
        count: 1,
        atoms_min: 10,
        atoms_max: 10,
        seed: 5,
        ..SynthSpec::default()
    };
    let record = gen_synthetic(&spec)?.records.remove(0).record;
    println!(
        "molecule `{}`: {} atoms, {} bonds, {} conformers",
        record.id,
        record.n_atoms(),
        record.graph.bonds.len(),
        record.conformers.len()
    );
    for (i, conf) in record.conformers.iter().enumerate() {
        println!("  conformer {i}: weight {:.4}", conf.weight);
    }

    let mut rng = Rng::from_seed(42);
    // Resample one conformer among the top C per step, then center it.
    let conformer = center_coords(select_conformer(&record, 5, &mut rng)?);

    let m = 0.15;
    println!(
        "masking ratio {m}: ceil({m} * {}) = {} nodes",
        record.n_atoms(),
        mask_count(m, record.n_atoms())
    );
    let pair = mask_views(&record, m, &conformer, &mut rng)?;
    println!("masked indices {:?}", pair.masked_indices);

    for (i, (orig, masked)) in record
        .graph
        .atoms
        .iter()
        .zip(&pair.view2d.atoms)
        .enumerate()
    {
        let flag = if masked.is_masked() { " <- masked" } else { "" };
        println!(
            "  atom {i}: z {} tag {}  ->  2D view z {} tag {}{flag}",
            orig.atomic_number, orig.tag, masked.atomic_number, masked.tag
        );
    }
    let masked_bonds = pair
        .view2d
        .bonds
        .iter()
        .filter(|b| b.bond_type == graphmvp::molio::BondType::Mask)
        .count();
    println!("2D view: {masked_bonds} incident bonds masked");

    // The 3D view hides the same identities but keeps every coordinate.
    assert_eq!(pair.view3d.conformer.coords, conformer.coords);
    let masked_3d: Vec<usize> = pair
        .view3d
        .atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_masked())
        .map(|(i, _)| i)
        .collect();
    println!("3D view masks the same set {masked_3d:?} with coordinates preserved");
    Ok(())
}
