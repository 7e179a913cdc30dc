//! Objective-function ablation: every contrastive/generative choice alone
//! and in pairwise combination, each scored by a frozen linear probe on the
//! same downstream task, plus a no-pretraining baseline row.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::molio::MoleculeRecord;
use crate::objectives::{ContrastiveKind, GenerativeKind, LossConfig, Variant};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::trainer::{
    finetune_probe, init_model, pretrain, AdamState, Checkpoint, ProbeConfig, ProbeMode, ProbeTask,
    TrainConfig, CHECKPOINT_VERSION,
};

use super::report::config_digest;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub name: String,
    pub contrastive: Option<String>,
    pub generative: Option<String>,
    pub per_seed: Vec<f64>,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub task: String,
    pub metric: String,
    pub cells: Vec<AblationCell>,
    pub config_digest: String,
}

/// The grid: a random-init baseline, each objective alone, then the four
/// pairwise combinations.
pub fn objective_grid() -> Vec<(String, Option<ContrastiveKind>, Option<GenerativeKind>)> {
    let c = [
        ("infonce", ContrastiveKind::Infonce),
        ("ebm_nce", ContrastiveKind::EbmNce),
    ];
    let g = [("vrr", GenerativeKind::Vrr), ("rr", GenerativeKind::Rr)];
    let mut grid: Vec<(String, Option<ContrastiveKind>, Option<GenerativeKind>)> =
        vec![("random".into(), None, None)];
    for (cn, ck) in c {
        grid.push((format!("{cn} only"), Some(ck), None));
    }
    for (gn, gk) in g {
        grid.push((format!("{gn} only"), None, Some(gk)));
    }
    for (cn, ck) in c {
        for (gn, gk) in g {
            grid.push((format!("{cn} + {gn}"), Some(ck), Some(gk)));
        }
    }
    grid
}

fn random_checkpoint(config: &TrainConfig, seed: u64) -> Result<Checkpoint> {
    let mut cfg = config.clone();
    cfg.seed = seed;
    let params = init_model(&cfg, &mut Rng::derive(seed, 1, 0))?;
    Ok(Checkpoint {
        version: CHECKPOINT_VERSION,
        config: cfg,
        params,
        adam: AdamState::new(config.lr, &ParamStore::new()),
        rng: Rng::from_seed(seed),
        step: 0,
    })
}

/// Pre-train once per (cell, seed) and score each checkpoint with a frozen
/// linear probe on `dataset`'s labels.
pub fn run_ablation(
    dataset: &[MoleculeRecord],
    base: &TrainConfig,
    probe_cfg: &ProbeConfig,
    task: ProbeTask,
    seeds: &[u64],
) -> Result<AblationReport> {
    let metric = match task {
        ProbeTask::Regression => "rmse",
        ProbeTask::Binary => "roc_auc",
        ProbeTask::MultiClass { .. } => "accuracy",
    };
    let mut cells = Vec::new();
    for (name, contrastive, generative) in objective_grid() {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let ckpt = match (contrastive, generative) {
                (None, None) => random_checkpoint(base, seed)?,
                (c, g) => {
                    let mut config = base.clone();
                    config.seed = seed;
                    config.loss = LossConfig {
                        contrastive: c.unwrap_or(ContrastiveKind::None),
                        generative: g.unwrap_or(GenerativeKind::None),
                        variant: Variant::Plain,
                        ..base.loss.clone()
                    };
                    pretrain(dataset, &config)?.checkpoint
                }
            };
            let probe = finetune_probe(
                &ckpt,
                dataset,
                ProbeMode::FrozenLinearProbe,
                task,
                &ProbeConfig {
                    seed,
                    ..probe_cfg.clone()
                },
            )?;
            per_seed.push(probe.metrics[metric]);
        }
        let mean = per_seed.iter().sum::<f64>() / per_seed.len().max(1) as f64;
        cells.push(AblationCell {
            name,
            contrastive: contrastive.map(|c| format!("{c:?}").to_lowercase()),
            generative: generative.map(|g| format!("{g:?}").to_lowercase()),
            per_seed,
            mean,
        });
    }
    Ok(AblationReport {
        task: match task {
            ProbeTask::Regression => "regression".into(),
            ProbeTask::Binary => "binary".into(),
            ProbeTask::MultiClass { classes } => format!("{classes}-class"),
        },
        metric: metric.into(),
        cells,
        config_digest: config_digest(&(base, seeds))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_table_structure() {
        let grid = objective_grid();
        assert_eq!(grid.len(), 9);
        assert_eq!(grid[0].0, "random");
        let singles = grid
            .iter()
            .filter(|(_, c, g)| c.is_some() != g.is_some())
            .count();
        let pairs = grid
            .iter()
            .filter(|(_, c, g)| c.is_some() && g.is_some())
            .count();
        assert_eq!(singles, 4);
        assert_eq!(pairs, 4);
    }
}
