//! End-to-end gradient verification of every objective through the full
//! encoder stack.
//!
//! Each check builds a 4-molecule batch with 2-layer encoders (d = 16),
//! pins all stochastic choices (masked views, conformers, negative
//! pairings, reparameterization noise), and compares the tape's gradients
//! against central finite differences over every parameter entry. The
//! stop-gradient targets of the generative losses are frozen at the base
//! point, which is the functional form whose gradient the training loop
//! actually follows.

use crate::encoders::{gin_forward, schnet_forward, GinConfig, SchNetConfig};
use crate::error::{Error, Result};
use crate::eval::{gen_synthetic, SynthKind, SynthSpec};
use crate::gradcheck::grad_check;
use crate::molio::{center_coords, mask_views, select_conformer, ViewPair};
use crate::objectives::{
    attr_mask_2d, contrastive_2d, ebm_nce_with, infonce, rr_frozen_targets, vrr_frozen_targets,
    AttrMaskInput, BatchReprs,
};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, VarId};
use crate::tensor::Tensor;
use crate::trainer::{
    init_model, TrainConfig, ATTR_PREFIX, GIN_PREFIX, HEADS_PREFIX, SCHNET_PREFIX,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckableLoss {
    Infonce,
    EbmNce,
    Vrr,
    Rr,
    AttrMask,
    CombinedG,
    CombinedC,
}

impl CheckableLoss {
    pub const ALL: [CheckableLoss; 7] = [
        CheckableLoss::Infonce,
        CheckableLoss::EbmNce,
        CheckableLoss::Vrr,
        CheckableLoss::Rr,
        CheckableLoss::AttrMask,
        CheckableLoss::CombinedG,
        CheckableLoss::CombinedC,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckableLoss::Infonce => "infonce",
            CheckableLoss::EbmNce => "ebm_nce",
            CheckableLoss::Vrr => "vrr",
            CheckableLoss::Rr => "rr",
            CheckableLoss::AttrMask => "attr_mask_2d",
            CheckableLoss::CombinedG => "combined_g",
            CheckableLoss::CombinedC => "combined_c",
        }
    }

    pub fn parse(s: &str) -> Option<CheckableLoss> {
        match s {
            "infonce" => Some(CheckableLoss::Infonce),
            "ebm_nce" => Some(CheckableLoss::EbmNce),
            "vrr" => Some(CheckableLoss::Vrr),
            "rr" => Some(CheckableLoss::Rr),
            "attr_mask" | "attr_mask_2d" => Some(CheckableLoss::AttrMask),
            "combined" | "combined_g" => Some(CheckableLoss::CombinedG),
            "combined_c" => Some(CheckableLoss::CombinedC),
            _ => None,
        }
    }
}

/// d = 16, two layers each side, small vocabularies.
fn check_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        batch_size: 4,
        gin: GinConfig {
            num_layers: 2,
            hidden_dim: 16,
            atom_vocab: 17,
            tag_vocab: 5,
            ..GinConfig::default()
        },
        schnet: SchNetConfig {
            num_layers: 2,
            hidden_dim: 16,
            rbf_count: 8,
            atom_vocab: 17,
            ..SchNetConfig::default()
        },
        ..TrainConfig::default()
    }
}

struct Fixture {
    config: TrainConfig,
    /// Pinned masked views of the 4 molecules.
    views: Vec<ViewPair>,
    /// Second masked views for the 2D-contrastive term.
    second_views: Vec<ViewPair>,
    /// True atom types of each view's masked nodes.
    true_types: Vec<Vec<u8>>,
    /// Negative pairings for the binary-cross-entropy loss.
    x_neg: Vec<usize>,
    y_neg: Vec<usize>,
    /// Seed for the pinned reparameterization noise.
    noise_seed: u64,
}

fn build_fixture(seed: u64) -> Result<Fixture> {
    let config = check_config(seed);
    let spec = SynthSpec {
        kind: SynthKind::Mixed,
        count: 4,
        atoms_min: 4,
        atoms_max: 7,
        noise: 0.05,
        seed,
    };
    let synth = gen_synthetic(&spec)?;
    let mut rng = Rng::derive(seed, 0x47434845, 0); // "GCHE"
    let mut views = Vec::new();
    let mut second_views = Vec::new();
    let mut true_types = Vec::new();
    for sr in &synth.records {
        let conformer = center_coords(select_conformer(&sr.record, config.c, &mut rng)?);
        // Force at least one masked atom per molecule so the
        // masked-attribute term always has work.
        let pair = mask_views(&sr.record, 0.3, &conformer, &mut rng)?;
        let second = mask_views(&sr.record, 0.3, &conformer, &mut rng)?;
        true_types.push(
            pair.masked_indices
                .iter()
                .map(|&i| sr.record.graph.atoms[i].atomic_number)
                .collect(),
        );
        views.push(pair);
        second_views.push(second);
    }
    let x_neg = rng.derangement(4);
    let y_neg = rng.derangement(4);
    Ok(Fixture {
        config,
        views,
        second_views,
        true_types,
        x_neg,
        y_neg,
        noise_seed: seed ^ 0x5eed,
    })
}

fn encode_2d(tape: &mut Tape, store: &ParamStore, fx: &Fixture) -> Result<(Vec<VarId>, VarId)> {
    let mut nodes = Vec::new();
    let mut rows = Vec::new();
    for pair in &fx.views {
        let (n, h) = gin_forward(tape, store, GIN_PREFIX, &fx.config.gin, &pair.view2d)?;
        nodes.push(n);
        rows.push(h);
    }
    Ok((nodes, tape.stack_rows(&rows)?))
}

fn encode_3d(tape: &mut Tape, store: &ParamStore, fx: &Fixture) -> Result<VarId> {
    let mut rows = Vec::new();
    for pair in &fx.views {
        let h = schnet_forward(
            tape,
            store,
            SCHNET_PREFIX,
            &fx.config.schnet,
            &pair.view3d.atoms,
            &pair.view3d.conformer.coords,
        )?;
        rows.push(h);
    }
    tape.stack_rows(&rows)
}

fn encode_second_2d(tape: &mut Tape, store: &ParamStore, fx: &Fixture) -> Result<VarId> {
    let mut rows = Vec::new();
    for pair in &fx.second_views {
        let (_, h) = gin_forward(tape, store, GIN_PREFIX, &fx.config.gin, &pair.view2d)?;
        rows.push(h);
    }
    tape.stack_rows(&rows)
}

/// Base-point representation values, used as the frozen reconstruction
/// targets of the generative terms.
fn base_targets(store: &ParamStore, fx: &Fixture) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let (_, hx) = encode_2d(&mut tape, store, fx)?;
    let hy = encode_3d(&mut tape, store, fx)?;
    Ok((tape.value(hy).clone(), tape.value(hx).clone()))
}

fn param_subset(full: &ParamStore, prefixes: &[&str]) -> Result<ParamStore> {
    let mut out = ParamStore::new();
    for prefix in prefixes {
        out.adopt(full, prefix)?;
    }
    Ok(out)
}

/// Max relative error of the analytic gradient against central differences
/// (step 1e-5) for one objective on the standard fixture.
pub fn loss_grad_check(loss: CheckableLoss, seed: u64) -> Result<f64> {
    let fx = build_fixture(seed)?;
    let full = init_model(&fx.config, &mut Rng::derive(seed, 1, 0))?;

    let store = match loss {
        CheckableLoss::Infonce | CheckableLoss::EbmNce => {
            param_subset(&full, &[GIN_PREFIX, SCHNET_PREFIX])?
        }
        CheckableLoss::Vrr | CheckableLoss::Rr | CheckableLoss::CombinedC => {
            param_subset(&full, &[GIN_PREFIX, SCHNET_PREFIX, HEADS_PREFIX])?
        }
        CheckableLoss::AttrMask => param_subset(&full, &[GIN_PREFIX, ATTR_PREFIX])?,
        CheckableLoss::CombinedG => full.clone(),
    };

    let needs_targets = matches!(
        loss,
        CheckableLoss::Vrr
            | CheckableLoss::Rr
            | CheckableLoss::CombinedG
            | CheckableLoss::CombinedC
    );
    let targets = if needs_targets {
        Some(base_targets(&store, &fx)?)
    } else {
        None
    };

    let fx = &fx;
    let targets = &targets;
    let f = move |store: &ParamStore| -> Result<(Tape, VarId)> {
        let mut tape = Tape::new();
        let value = match loss {
            CheckableLoss::Infonce => {
                let (_, hx) = encode_2d(&mut tape, store, fx)?;
                let hy = encode_3d(&mut tape, store, fx)?;
                infonce(&mut tape, &BatchReprs { hx, hy })?
            }
            CheckableLoss::EbmNce => {
                let (_, hx) = encode_2d(&mut tape, store, fx)?;
                let hy = encode_3d(&mut tape, store, fx)?;
                ebm_nce_with(&mut tape, &BatchReprs { hx, hy }, &fx.x_neg, &fx.y_neg)?
            }
            CheckableLoss::Vrr | CheckableLoss::Rr => {
                let (_, hx) = encode_2d(&mut tape, store, fx)?;
                let hy = encode_3d(&mut tape, store, fx)?;
                let (ty, tx) = targets.as_ref().unwrap();
                let tgt_x = tape.leaf(ty.clone());
                let tgt_y = tape.leaf(tx.clone());
                let batch = BatchReprs { hx, hy };
                if loss == CheckableLoss::Vrr {
                    let mut noise = Rng::from_seed(fx.noise_seed);
                    vrr_frozen_targets(
                        &mut tape,
                        store,
                        HEADS_PREFIX,
                        &batch,
                        tgt_x,
                        tgt_y,
                        0.5,
                        &mut noise,
                    )?
                } else {
                    rr_frozen_targets(&mut tape, store, HEADS_PREFIX, &batch, tgt_x, tgt_y)?
                }
            }
            CheckableLoss::AttrMask => {
                let (nodes, _) = encode_2d(&mut tape, store, fx)?;
                let inputs: Vec<AttrMaskInput> = nodes
                    .iter()
                    .zip(&fx.views)
                    .zip(&fx.true_types)
                    .map(|((&node_reprs, pair), types)| AttrMaskInput {
                        node_reprs,
                        masked_indices: &pair.masked_indices,
                        true_types: types,
                    })
                    .collect();
                attr_mask_2d(
                    &mut tape,
                    store,
                    ATTR_PREFIX,
                    &inputs,
                    fx.config.gin.atom_vocab,
                )?
            }
            CheckableLoss::CombinedG | CheckableLoss::CombinedC => {
                let (nodes, hx) = encode_2d(&mut tape, store, fx)?;
                let hy = encode_3d(&mut tape, store, fx)?;
                let batch = BatchReprs { hx, hy };
                let contrastive = ebm_nce_with(&mut tape, &batch, &fx.x_neg, &fx.y_neg)?;
                let (ty, tx) = targets.as_ref().unwrap();
                let tgt_x = tape.leaf(ty.clone());
                let tgt_y = tape.leaf(tx.clone());
                let mut noise = Rng::from_seed(fx.noise_seed);
                let generative = vrr_frozen_targets(
                    &mut tape,
                    store,
                    HEADS_PREFIX,
                    &batch,
                    tgt_x,
                    tgt_y,
                    0.5,
                    &mut noise,
                )?;
                let ssl2d = if loss == CheckableLoss::CombinedG {
                    let inputs: Vec<AttrMaskInput> = nodes
                        .iter()
                        .zip(&fx.views)
                        .zip(&fx.true_types)
                        .map(|((&node_reprs, pair), types)| AttrMaskInput {
                            node_reprs,
                            masked_indices: &pair.masked_indices,
                            true_types: types,
                        })
                        .collect();
                    attr_mask_2d(
                        &mut tape,
                        store,
                        ATTR_PREFIX,
                        &inputs,
                        fx.config.gin.atom_vocab,
                    )?
                } else {
                    let second = encode_second_2d(&mut tape, store, fx)?;
                    contrastive_2d(&mut tape, batch.hx, second)?
                };
                let sum = tape.add(contrastive, generative)?;
                tape.add(sum, ssl2d)?
            }
        };
        Ok((tape, value))
    };
    grad_check(&store, 1e-5, &f)
}

/// Run every objective's gradient check; returns `(name, max rel error)`
/// pairs in a fixed order.
pub fn all_loss_grad_checks(seed: u64) -> Result<Vec<(&'static str, f64)>> {
    CheckableLoss::ALL
        .iter()
        .map(|&loss| Ok((loss.name(), loss_grad_check(loss, seed)?)))
        .collect()
}

/// The tolerance the gradient checks must meet.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

pub fn parse_loss_or_error(s: &str) -> Result<CheckableLoss> {
    CheckableLoss::parse(s).ok_or_else(|| {
        Error::Config(format!(
            "unknown loss `{s}`; expected one of infonce, ebm_nce, vrr, rr, attr_mask, combined, combined_c"
        ))
    })
}
