//! Optimization loop: batching, view construction, loss evaluation, Adam
//! updates, metric logging, checkpointing, and downstream probing.
//!
//! Every random draw comes from a stream derived from `(seed, purpose,
//! index)` — shuffling from the epoch index, view construction and noise
//! from the global step index — so a run is a pure function of (seed,
//! config, dataset) and resuming from a checkpoint replays the remaining
//! steps bit-exactly.

mod adam;
mod checkpoint;
mod metrics_log;

pub use adam::AdamState;
pub use checkpoint::{
    crc32, load as load_checkpoint, save as save_checkpoint, Checkpoint, CHECKPOINT_VERSION,
};
pub use metrics_log::{MetricRecord, MetricsLog};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoders::{
    gin_forward, init_gin, init_heads, init_schnet, schnet_forward, GinConfig, HeadConfig,
    SchNetConfig,
};
use crate::error::{Error, Result};
use crate::eval::{accuracy, rmse, roc_auc};
use crate::molio::{center_coords, mask_views, select_conformer, MoleculeRecord};
use crate::objectives::{
    combined_loss, init_attr_head, AttrMaskInput, Aux2d, BatchReprs, LossConfig,
};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, VarId};
use crate::tensor::Tensor;

pub const GIN_PREFIX: &str = "gin2d";
pub const SCHNET_PREFIX: &str = "schnet3d";
pub const HEADS_PREFIX: &str = "heads";
pub const ATTR_PREFIX: &str = "attr";

// Stream tags for Rng::derive.
const TAG_INIT: u64 = 1;
const TAG_EPOCH: u64 = 2;
const TAG_STEP: u64 = 3;
const TAG_SPLIT: u64 = 4;
const TAG_PROBE: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Masking ratio M.
    pub m: f64,
    /// Conformers sampled from the top C by weight.
    pub c: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub loss: LossConfig,
    pub gin: GinConfig,
    pub schnet: SchNetConfig,
    /// Latent dimension of the generative heads; half the representation
    /// dimension when unset.
    pub latent_dim: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            m: 0.15,
            c: 5,
            batch_size: 32,
            epochs: 5,
            lr: 1e-3,
            seed: 0,
            loss: LossConfig::default(),
            gin: GinConfig::default(),
            schnet: SchNetConfig::default(),
            latent_dim: None,
        }
    }
}

impl TrainConfig {
    pub fn head_config(&self) -> HeadConfig {
        HeadConfig {
            repr_dim: self.gin.hidden_dim,
            latent_dim: self.latent_dim.unwrap_or((self.gin.hidden_dim / 2).max(1)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.m) {
            return Err(Error::Config(format!(
                "masking ratio {} outside [0, 1]",
                self.m
            )));
        }
        if self.c == 0 {
            return Err(Error::Config("conformer count must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be >= 2".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        self.loss.validate()?;
        self.gin.validate()?;
        self.schnet.validate()?;
        if self.gin.hidden_dim != self.schnet.hidden_dim {
            return Err(Error::Config(format!(
                "2D and 3D encoders must share a representation dimension ({} vs {})",
                self.gin.hidden_dim, self.schnet.hidden_dim
            )));
        }
        self.head_config().validate()
    }
}

/// Fresh parameters for the full model (both encoders, generative heads,
/// masked-attribute classifier), drawn from `rng` in a fixed order.
pub fn init_model(config: &TrainConfig, rng: &mut Rng) -> Result<ParamStore> {
    let mut store = ParamStore::new();
    init_gin(&mut store, GIN_PREFIX, &config.gin, rng)?;
    init_schnet(&mut store, SCHNET_PREFIX, &config.schnet, rng)?;
    init_heads(&mut store, HEADS_PREFIX, &config.head_config(), rng)?;
    init_attr_head(
        &mut store,
        ATTR_PREFIX,
        config.gin.hidden_dim,
        config.gin.atom_vocab,
        rng,
    )?;
    Ok(store)
}

#[derive(Default)]
pub struct PretrainOptions {
    /// Continue a previous run instead of initializing fresh parameters.
    pub resume: Option<Checkpoint>,
    /// Stop after this many completed global steps (for mid-run
    /// checkpointing).
    pub stop_after_steps: Option<u64>,
}

#[derive(Debug)]
pub struct PretrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: MetricsLog,
}

pub fn pretrain(dataset: &[MoleculeRecord], config: &TrainConfig) -> Result<PretrainOutcome> {
    pretrain_with(dataset, config, PretrainOptions::default())
}

/// Index chunks for one epoch: sequential over the shuffled order, final
/// chunk dropped when it has fewer than 2 records (contrastive terms need
/// pairs).
fn epoch_batches(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    order
        .chunks(batch_size)
        .filter(|chunk| chunk.len() >= 2)
        .map(|chunk| chunk.to_vec())
        .collect()
}

pub fn pretrain_with(
    dataset: &[MoleculeRecord],
    config: &TrainConfig,
    opts: PretrainOptions,
) -> Result<PretrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Train("empty dataset".into()));
    }
    if dataset.len() < 2 {
        return Err(Error::Train(
            "dataset yields no batch of at least 2 molecules; contrastive objectives need K >= 2"
                .into(),
        ));
    }

    let seed = config.seed;
    let (mut params, mut adam, start_step) = match opts.resume {
        Some(ckpt) => {
            if &ckpt.config != config {
                return Err(Error::Config(
                    "resume checkpoint was produced with a different config".into(),
                ));
            }
            (ckpt.params, ckpt.adam, ckpt.step)
        }
        None => {
            let params = init_model(config, &mut Rng::derive(seed, TAG_INIT, 0))?;
            let adam = AdamState::new(config.lr, &params);
            (params, adam, 0)
        }
    };

    let mut metrics = MetricsLog::new();
    let mut global_step: u64 = 0;
    let mut stopped_early = false;

    'epochs: for epoch in 0..config.epochs as u64 {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        Rng::derive(seed, TAG_EPOCH, epoch).shuffle(&mut order);
        for batch in epoch_batches(&order, config.batch_size) {
            global_step += 1;
            if global_step <= start_step {
                continue;
            }
            let started = Instant::now();
            let mut step_rng = Rng::derive(seed, TAG_STEP, global_step);
            let (loss_value, terms) = train_step(dataset, &batch, config, &params, &mut step_rng)
                .map_err(|e| Error::Train(format!("step {global_step}: {e}")))
                .and_then(|(grads, loss_value, terms)| {
                    adam.step(&mut params, &grads)?;
                    Ok((loss_value, terms))
                })?;
            metrics.push(MetricRecord {
                step: global_step,
                loss: loss_value,
                terms,
                secs: started.elapsed().as_secs_f64(),
            })?;
            if opts.stop_after_steps == Some(global_step) {
                stopped_early = true;
                break 'epochs;
            }
        }
    }

    if global_step == 0 {
        return Err(Error::Train(
            "dataset yields no batch of at least 2 molecules; contrastive objectives need K >= 2"
                .into(),
        ));
    }
    let completed = if stopped_early {
        opts.stop_after_steps.unwrap()
    } else {
        global_step
    };

    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        config: config.clone(),
        params,
        adam,
        rng: Rng::derive(seed, TAG_STEP, completed + 1),
        step: completed,
    };
    Ok(PretrainOutcome {
        checkpoint,
        metrics,
    })
}

struct StepItem {
    hx: VarId,
    hy: VarId,
    node_reprs: VarId,
    second_hx: Option<VarId>,
    masked: Vec<usize>,
    true_types: Vec<u8>,
}

/// Build the step's tape, evaluate the combined loss, and return gradients.
/// Draw order per record: conformer, mask, (second mask for the C variant);
/// then the loss's own draws. Fixed order keeps runs replayable.
fn train_step(
    dataset: &[MoleculeRecord],
    batch: &[usize],
    config: &TrainConfig,
    params: &ParamStore,
    rng: &mut Rng,
) -> Result<(crate::tape::Gradients, f64, BTreeMap<String, f64>)> {
    use crate::objectives::Variant;

    let mut tape = Tape::new();
    let mut items = Vec::with_capacity(batch.len());
    for &idx in batch {
        let record = &dataset[idx];
        let conformer = select_conformer(record, config.c, rng)?.clone();
        let conformer = center_coords(&conformer);
        let pair = mask_views(record, config.m, &conformer, rng)?;
        let (node_reprs, hx) =
            gin_forward(&mut tape, params, GIN_PREFIX, &config.gin, &pair.view2d)?;
        let hy = schnet_forward(
            &mut tape,
            params,
            SCHNET_PREFIX,
            &config.schnet,
            &pair.view3d.atoms,
            &pair.view3d.conformer.coords,
        )?;
        let second_hx = if config.loss.variant == Variant::C {
            let second = mask_views(record, config.m, &conformer, rng)?;
            let (_, h) = gin_forward(&mut tape, params, GIN_PREFIX, &config.gin, &second.view2d)?;
            Some(h)
        } else {
            None
        };
        let true_types: Vec<u8> = pair
            .masked_indices
            .iter()
            .map(|&i| record.graph.atoms[i].atomic_number)
            .collect();
        items.push(StepItem {
            hx,
            hy,
            node_reprs,
            second_hx,
            masked: pair.masked_indices,
            true_types,
        });
    }

    let hx_rows: Vec<VarId> = items.iter().map(|i| i.hx).collect();
    let hy_rows: Vec<VarId> = items.iter().map(|i| i.hy).collect();
    let batch_reprs = BatchReprs {
        hx: tape.stack_rows(&hx_rows)?,
        hy: tape.stack_rows(&hy_rows)?,
    };

    let aux = match config.loss.variant {
        Variant::Plain => Aux2d::None,
        Variant::G => Aux2d::AttrMask {
            inputs: items
                .iter()
                .map(|i| AttrMaskInput {
                    node_reprs: i.node_reprs,
                    masked_indices: &i.masked,
                    true_types: &i.true_types,
                })
                .collect(),
            atom_vocab: config.gin.atom_vocab,
        },
        Variant::C => {
            let second: Vec<VarId> = items.iter().map(|i| i.second_hx.unwrap()).collect();
            Aux2d::Contrastive {
                first: batch_reprs.hx,
                second: tape.stack_rows(&second)?,
            }
        }
    };

    let combined = combined_loss(
        &mut tape,
        params,
        HEADS_PREFIX,
        &batch_reprs,
        &config.loss,
        aux,
        rng,
    )?;
    let loss_value = tape.value(combined.total).item();
    if !loss_value.is_finite() {
        return Err(Error::NonFinite(format!("loss value {loss_value}")));
    }
    let terms: BTreeMap<String, f64> = combined.terms.into_iter().collect();
    let grads = tape.backward(combined.total, params)?;
    Ok((grads, loss_value, terms))
}

/// Embed a molecule with the 2D encoder only, no masking; the downstream
/// path where no 3D information exists.
pub fn embed_2d(
    params: &ParamStore,
    gin_cfg: &GinConfig,
    record: &MoleculeRecord,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let (_, h) = gin_forward(&mut tape, params, GIN_PREFIX, gin_cfg, &record.graph)?;
    Ok(tape.value(h).clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeMode {
    FrozenLinearProbe,
    FullFinetune,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeTask {
    Binary,
    MultiClass { classes: usize },
    Regression,
}

impl ProbeTask {
    fn output_dim(&self) -> usize {
        match self {
            ProbeTask::Binary | ProbeTask::Regression => 1,
            ProbeTask::MultiClass { classes } => *classes,
        }
    }

    /// Guess the task from the labels: {0, 1} is binary, small non-negative
    /// integers are classes, anything else is regression.
    pub fn infer(labels: &[f64]) -> ProbeTask {
        let integral = labels
            .iter()
            .all(|&l| l >= 0.0 && l.fract() == 0.0 && l < 64.0);
        if !integral {
            return ProbeTask::Regression;
        }
        let max = labels.iter().cloned().fold(0.0, f64::max) as usize;
        if max <= 1 {
            ProbeTask::Binary
        } else {
            ProbeTask::MultiClass { classes: max + 1 }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Minibatch size for full fine-tuning; the frozen probe trains
    /// full-batch on cached embeddings.
    pub batch_size: usize,
    pub seed: u64,
    pub holdout_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 200,
            lr: 0.05,
            batch_size: 32,
            seed: 0,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Debug)]
pub struct ProbeOutcome {
    /// Held-out metrics: `roc_auc`/`accuracy` for classification, `rmse`
    /// for regression.
    pub metrics: BTreeMap<String, f64>,
    /// Trained probe head parameters.
    pub head: ParamStore,
    /// Encoder parameters after the run: bit-identical to the checkpoint's
    /// in frozen mode, updated in full mode.
    pub encoder: ParamStore,
}

fn labels_of(dataset: &[MoleculeRecord]) -> Result<Vec<f64>> {
    dataset
        .iter()
        .map(|r| {
            r.label
                .ok_or_else(|| Error::Train(format!("record `{}` is missing a label", r.id)))
        })
        .collect()
}

fn check_labels(task: ProbeTask, labels: &[f64]) -> Result<()> {
    match task {
        ProbeTask::Binary => {
            if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
                return Err(Error::Train("binary task labels must be 0 or 1".into()));
            }
        }
        ProbeTask::MultiClass { classes } => {
            if labels
                .iter()
                .any(|&l| l.fract() != 0.0 || l < 0.0 || l >= classes as f64)
            {
                return Err(Error::Train(format!(
                    "class labels must be integers in 0..{classes}"
                )));
            }
        }
        ProbeTask::Regression => {
            if labels.iter().any(|l| !l.is_finite()) {
                return Err(Error::Train("regression labels must be finite".into()));
            }
        }
    }
    Ok(())
}

fn supervised_loss(
    tape: &mut Tape,
    logits: VarId,
    labels: &[f64],
    task: ProbeTask,
) -> Result<VarId> {
    match task {
        ProbeTask::Binary => {
            // Cross-entropy with logits: mean(softplus(logit) - y * logit).
            let y = tape.leaf(Tensor::matrix(labels.len(), 1, labels.to_vec())?);
            let sp = tape.softplus(logits)?;
            let yl = tape.mul(y, logits)?;
            let diff = tape.sub(sp, yl)?;
            tape.mean(diff, None)
        }
        ProbeTask::MultiClass { classes } => {
            let idx: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
            let onehot = tape.leaf(crate::encoders::one_hot(&idx, classes));
            let lse = tape.logsumexp(logits, Some(1))?;
            let tl = tape.mul(logits, onehot)?;
            let true_logits = tape.sum(tl, Some(1))?;
            let ce = tape.sub(lse, true_logits)?;
            tape.mean(ce, None)
        }
        ProbeTask::Regression => {
            let y = tape.leaf(Tensor::matrix(labels.len(), 1, labels.to_vec())?);
            let diff = tape.sub(logits, y)?;
            let sq = tape.square(diff)?;
            tape.mean(sq, None)
        }
    }
}

fn eval_metrics(
    raw_outputs: &[Vec<f64>],
    labels: &[f64],
    task: ProbeTask,
) -> Result<BTreeMap<String, f64>> {
    let mut metrics = BTreeMap::new();
    match task {
        ProbeTask::Binary => {
            let scores: Vec<f64> = raw_outputs
                .iter()
                .map(|o| 1.0 / (1.0 + (-o[0]).exp()))
                .collect();
            let truth: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
            metrics.insert("roc_auc".into(), roc_auc(&scores, &truth)?);
            let preds: Vec<usize> = scores.iter().map(|&s| usize::from(s >= 0.5)).collect();
            let targets: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
            metrics.insert("accuracy".into(), accuracy(&preds, &targets)?);
        }
        ProbeTask::MultiClass { .. } => {
            let preds: Vec<usize> = raw_outputs
                .iter()
                .map(|o| {
                    o.iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap()
                })
                .collect();
            let targets: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
            metrics.insert("accuracy".into(), accuracy(&preds, &targets)?);
        }
        ProbeTask::Regression => {
            let preds: Vec<f64> = raw_outputs.iter().map(|o| o[0]).collect();
            metrics.insert("rmse".into(), rmse(&preds, labels)?);
        }
    }
    Ok(metrics)
}

/// Train a downstream head on 2D embeddings from a pre-trained checkpoint.
///
/// Frozen mode caches each molecule's embedding once and trains only a
/// linear head; the encoder parameters are returned untouched. Full mode
/// fine-tunes head and encoder jointly. Evaluation runs on a held-out
/// 80/20 seeded split.
pub fn finetune_probe(
    ckpt: &Checkpoint,
    dataset: &[MoleculeRecord],
    mode: ProbeMode,
    task: ProbeTask,
    pcfg: &ProbeConfig,
) -> Result<ProbeOutcome> {
    let labels = labels_of(dataset)?;
    check_labels(task, &labels)?;
    let n = dataset.len();
    if n < 5 {
        return Err(Error::Train(format!(
            "dataset of {n} records is too small to split"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    Rng::derive(pcfg.seed, TAG_SPLIT, 0).shuffle(&mut order);
    let train_count = ((n as f64) * (1.0 - pcfg.holdout_fraction)).round() as usize;
    let train_count = train_count.clamp(1, n - 1);
    let (train_idx, test_idx) = order.split_at(train_count);

    if task == ProbeTask::Binary {
        let train_labels: Vec<f64> = train_idx.iter().map(|&i| labels[i]).collect();
        if train_labels.iter().all(|&l| l == 0.0) || train_labels.iter().all(|&l| l == 1.0) {
            return Err(Error::Train(
                "training split contains a single class; reseed the split or add data".into(),
            ));
        }
    }

    let d = ckpt.config.gin.hidden_dim;
    let out_dim = task.output_dim();
    let mut probe_rng = Rng::derive(pcfg.seed, TAG_PROBE, 0);

    // Encoder parameter subset from the checkpoint.
    let mut encoder = ParamStore::new();
    encoder.adopt(&ckpt.params, GIN_PREFIX)?;

    match mode {
        ProbeMode::FrozenLinearProbe => {
            let mut head = ParamStore::new();
            head.init_linear("probe.w", "probe.b", d, out_dim, &mut probe_rng)?;

            // Cache every embedding once; the encoder is never touched.
            let mut embeddings = Vec::with_capacity(n);
            for record in dataset {
                embeddings.push(embed_2d(&encoder, &ckpt.config.gin, record)?);
            }
            let gather = |idx: &[usize]| -> Tensor {
                let mut data = Vec::with_capacity(idx.len() * d);
                for &i in idx {
                    data.extend_from_slice(embeddings[i].data());
                }
                Tensor::new(vec![idx.len(), d], data).expect("embedding matrix")
            };
            let x_train = gather(train_idx);
            let train_labels: Vec<f64> = train_idx.iter().map(|&i| labels[i]).collect();

            let mut adam = AdamState::new(pcfg.lr, &head);
            for _ in 0..pcfg.epochs {
                let mut tape = Tape::new();
                let x = tape.leaf(x_train.clone());
                let w = tape.param(&head, "probe.w")?;
                let b = tape.param(&head, "probe.b")?;
                let logits = tape.matmul(x, w)?;
                let logits = tape.add(logits, b)?;
                let loss = supervised_loss(&mut tape, logits, &train_labels, task)?;
                let grads = tape.backward(loss, &head)?;
                adam.step(&mut head, &grads)?;
            }

            // Held-out evaluation with the trained head.
            let x_test = gather(test_idx);
            let test_labels: Vec<f64> = test_idx.iter().map(|&i| labels[i]).collect();
            let mut tape = Tape::new();
            let x = tape.leaf(x_test);
            let w = tape.param(&head, "probe.w")?;
            let b = tape.param(&head, "probe.b")?;
            let logits = tape.matmul(x, w)?;
            let logits = tape.add(logits, b)?;
            let outputs: Vec<Vec<f64>> = (0..test_idx.len())
                .map(|r| tape.value(logits).row(r).to_vec())
                .collect();
            let metrics = eval_metrics(&outputs, &test_labels, task)?;
            Ok(ProbeOutcome {
                metrics,
                head,
                encoder,
            })
        }
        ProbeMode::FullFinetune => {
            let mut store = ParamStore::new();
            store.adopt(&ckpt.params, GIN_PREFIX)?;
            store.init_linear("probe.w", "probe.b", d, out_dim, &mut probe_rng)?;
            let mut adam = AdamState::new(pcfg.lr, &store);

            for epoch in 0..pcfg.epochs as u64 {
                let mut epoch_order = train_idx.to_vec();
                Rng::derive(pcfg.seed, TAG_EPOCH, epoch).shuffle(&mut epoch_order);
                for chunk in epoch_order.chunks(pcfg.batch_size) {
                    let mut tape = Tape::new();
                    let mut rows = Vec::with_capacity(chunk.len());
                    for &i in chunk {
                        let (_, h) = gin_forward(
                            &mut tape,
                            &store,
                            GIN_PREFIX,
                            &ckpt.config.gin,
                            &dataset[i].graph,
                        )?;
                        rows.push(h);
                    }
                    let x = tape.stack_rows(&rows)?;
                    let w = tape.param(&store, "probe.w")?;
                    let b = tape.param(&store, "probe.b")?;
                    let logits = tape.matmul(x, w)?;
                    let logits = tape.add(logits, b)?;
                    let chunk_labels: Vec<f64> = chunk.iter().map(|&i| labels[i]).collect();
                    let loss = supervised_loss(&mut tape, logits, &chunk_labels, task)?;
                    let grads = tape.backward(loss, &store)?;
                    adam.step(&mut store, &grads)?;
                }
            }

            let test_labels: Vec<f64> = test_idx.iter().map(|&i| labels[i]).collect();
            let mut outputs = Vec::with_capacity(test_idx.len());
            for &i in test_idx {
                let mut tape = Tape::new();
                let (_, h) = gin_forward(
                    &mut tape,
                    &store,
                    GIN_PREFIX,
                    &ckpt.config.gin,
                    &dataset[i].graph,
                )?;
                let hm = tape.stack_rows(&[h])?;
                let w = tape.param(&store, "probe.w")?;
                let b = tape.param(&store, "probe.b")?;
                let logits = tape.matmul(hm, w)?;
                let logits = tape.add(logits, b)?;
                outputs.push(tape.value(logits).row(0).to_vec());
            }
            let metrics = eval_metrics(&outputs, &test_labels, task)?;

            let mut head = ParamStore::new();
            head.adopt(&store, "probe")?;
            let mut encoder_out = ParamStore::new();
            encoder_out.adopt(&store, GIN_PREFIX)?;
            Ok(ProbeOutcome {
                metrics,
                head,
                encoder: encoder_out,
            })
        }
    }
}
