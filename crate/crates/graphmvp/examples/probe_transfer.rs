//! The transfer experiment: pre-train on unlabeled 2D+3D pairs, then score
//! a frozen linear probe on the 3D-diameter task against a random-init
//! encoder. Pre-training sees no labels; the gap is what the 3D view
//! taught the 2D encoder.
//!
//! ```bash
//! cargo run --release --example probe_transfer
//! ```

use graphmvp::encoders::{GinConfig, SchNetConfig};
use graphmvp::eval::{gen_synthetic, SynthSpec, SynthTask, DIAMETER_CLASSES};
use graphmvp::params::ParamStore;
use graphmvp::rng::Rng;
use graphmvp::trainer::{
    finetune_probe, init_model, pretrain, AdamState, Checkpoint, ProbeConfig, ProbeMode, ProbeTask,
    TrainConfig, CHECKPOINT_VERSION,
};

fn main() -> graphmvp::Result<()> {
    let synth = gen_synthetic(&SynthSpec {
        count: 2000,
        seed: 42,
        ..SynthSpec::default()
    })?;
    let (_, dataset) = synth.labeled(SynthTask::Diameter);

    let seed = 0;
    let config = TrainConfig {
        seed,
        epochs: 20,
        gin: GinConfig {
            hidden_dim: 32,
            ..GinConfig::default()
        },
        schnet: SchNetConfig {
            hidden_dim: 32,
            ..SchNetConfig::default()
        },
        ..TrainConfig::default()
    };

    println!("pre-training on {} unlabeled molecules...", dataset.len());
    let out = pretrain(&dataset, &config)?;
    let records = out.metrics.records();
    let tenth = (records.len() / 10).max(1);
    let first: f64 = records[..tenth].iter().map(|r| r.loss).sum::<f64>() / tenth as f64;
    let last: f64 = records[records.len() - tenth..]
        .iter()
        .map(|r| r.loss)
        .sum::<f64>()
        / tenth as f64;
    println!(
        "{} steps; mean loss over first 10% {first:.2}, over last 10% {last:.2}",
        out.checkpoint.step
    );

    let task = ProbeTask::MultiClass {
        classes: DIAMETER_CLASSES,
    };
    let pcfg = ProbeConfig {
        seed,
        ..ProbeConfig::default()
    };
    let pre = finetune_probe(
        &out.checkpoint,
        &dataset,
        ProbeMode::FrozenLinearProbe,
        task,
        &pcfg,
    )?;

    // Same architecture, fresh random parameters, same probe protocol.
    let random = Checkpoint {
        version: CHECKPOINT_VERSION,
        config: config.clone(),
        params: init_model(&config, &mut Rng::derive(seed + 1000, 1, 0))?,
        adam: AdamState::new(config.lr, &ParamStore::new()),
        rng: Rng::from_seed(seed),
        step: 0,
    };
    let base = finetune_probe(&random, &dataset, ProbeMode::FrozenLinearProbe, task, &pcfg)?;

    let (a, b) = (pre.metrics["accuracy"], base.metrics["accuracy"]);
    println!("frozen linear probe, {DIAMETER_CLASSES}-class diameter recognition:");
    println!("  pre-trained encoder: {:.1}%", 100.0 * a);
    println!("  random-init encoder: {:.1}%", 100.0 * b);
    println!("  gap: {:+.1} points", 100.0 * (a - b));
    Ok(())
}
