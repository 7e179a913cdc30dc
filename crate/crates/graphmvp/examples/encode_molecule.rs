//! Run both encoders on one molecule and demonstrate their symmetry
//! properties: the 2D encoder is invariant to node relabeling, the 3D
//! encoder to rigid motions of the conformer.
//!
//! ```bash
//! cargo run --release --example encode_molecule
//! ```

use graphmvp::encoders::{gin_forward, schnet_forward};
use graphmvp::eval::{gen_synthetic, SynthSpec};
use graphmvp::molio::{random_rotation, transform_coords, Bond, Molecule2D};
use graphmvp::rng::Rng;
use graphmvp::tape::Tape;
use graphmvp::trainer::{init_model, TrainConfig, GIN_PREFIX, SCHNET_PREFIX};

fn main() -> graphmvp::Result<()> {
    let config = TrainConfig::default();
    let mut rng = Rng::from_seed(1);
    let params = init_model(&config, &mut rng)?;

    let record = gen_synthetic(&SynthSpec {
        count: 1,
        seed: 3,
        ..SynthSpec::default()
    })?
    .records
    .remove(0)
    .record;
    let coords = &record.conformers[0].coords;

    let mut tape = Tape::new();
    let (nodes, h2d) = gin_forward(&mut tape, &params, GIN_PREFIX, &config.gin, &record.graph)?;
    let h3d = schnet_forward(
        &mut tape,
        &params,
        SCHNET_PREFIX,
        &config.schnet,
        &record.graph.atoms,
        coords,
    )?;
    println!(
        "molecule `{}`: node reprs {:?}, h_2d dim {}, h_3d dim {}",
        record.id,
        tape.value(nodes).shape(),
        tape.value(h2d).numel(),
        tape.value(h3d).numel()
    );

    // Permute the atom order (re-indexing bonds) and compare h_2d.
    let n = record.n_atoms();
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let mut p_atoms = record.graph.atoms.clone();
    for (old, &new) in perm.iter().enumerate() {
        p_atoms[new] = record.graph.atoms[old];
    }
    let p_bonds: Vec<Bond> = record
        .graph
        .bonds
        .iter()
        .map(|b| Bond::new(perm[b.i], perm[b.j], b.bond_type))
        .collect::<graphmvp::Result<_>>()?;
    let permuted = Molecule2D {
        atoms: p_atoms,
        bonds: p_bonds,
    };
    let mut tape_p = Tape::new();
    let (_, h2d_p) = gin_forward(&mut tape_p, &params, GIN_PREFIX, &config.gin, &permuted)?;
    let dev = tape
        .value(h2d)
        .data()
        .iter()
        .zip(tape_p.value(h2d_p).data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("2D permutation deviation (sup norm): {dev:.3e}");

    // Rotate + translate the conformer and compare h_3d.
    let q = random_rotation(&mut rng);
    let t = [rng.normal() * 4.0, rng.normal() * 4.0, rng.normal() * 4.0];
    let moved = transform_coords(coords, &q, &t);
    let mut tape_r = Tape::new();
    let h3d_r = schnet_forward(
        &mut tape_r,
        &params,
        SCHNET_PREFIX,
        &config.schnet,
        &record.graph.atoms,
        &moved,
    )?;
    let dev3 = tape
        .value(h3d)
        .data()
        .iter()
        .zip(tape_r.value(h3d_r).data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("3D rigid-motion deviation (sup norm): {dev3:.3e}");
    Ok(())
}
