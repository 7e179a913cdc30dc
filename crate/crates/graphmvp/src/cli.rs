//! Command-line surface. Argument errors and invalid configs exit 2 with a
//! one-line diagnostic; runtime failures exit 1.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{
    gen_synthetic, mi_bench, run_ablation, EvalReport, MiBenchConfig, SynthKind, SynthSpec,
    SynthTask,
};
use crate::molio::{load_dataset, write_jsonl, MoleculeRecord, ParseMode};
use crate::objectives::{ContrastiveKind, GenerativeKind, Variant};
use crate::trainer::{
    finetune_probe, load_checkpoint, pretrain_with, save_checkpoint, PretrainOptions, ProbeConfig,
    ProbeMode, ProbeTask, TrainConfig,
};
use crate::verify::{
    all_loss_grad_checks, loss_grad_check, parse_loss_or_error, GRAD_CHECK_TOLERANCE,
};

#[derive(Parser)]
#[command(
    name = "graphmvp",
    version,
    about = "Multi-view self-supervised pre-training for molecular graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic molecular dataset with geometry-derived labels.
    Synth(SynthArgs),
    /// Pre-train the 2D encoder against 3D conformers.
    Pretrain(PretrainArgs),
    /// Fine-tune a pre-trained encoder on a labeled dataset.
    Finetune(FinetuneArgs),
    /// Train a linear probe on frozen embeddings.
    Probe(FinetuneArgs),
    /// Verify objective gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Mutual-information lower-bound benchmark on correlated Gaussians.
    #[command(name = "mi-bench")]
    MiBench(MiBenchArgs),
    /// Objective-function ablation grid with linear-probe scoring.
    Ablation(AblationArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset path (JSONL).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "mixed")]
    kind: String,
    #[arg(long, default_value_t = 2000)]
    count: usize,
    /// Which label to write: diameter | contact.
    #[arg(long, default_value = "diameter")]
    task: String,
    #[arg(long, default_value_t = 6)]
    atoms_min: usize,
    #[arg(long, default_value_t = 16)]
    atoms_max: usize,
    /// Coordinate noise in angstroms.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

#[derive(Args)]
struct PretrainArgs {
    /// Training config JSON (TrainConfig fields).
    #[arg(long)]
    config: PathBuf,
    /// Pre-training dataset (JSONL).
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for model.gmvp and metrics.jsonl.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the objective: infonce | ebm_nce | vrr | rr | combined.
    #[arg(long)]
    loss: Option<String>,
    /// Override the variant: plain | G | C.
    #[arg(long)]
    variant: Option<String>,
    /// Resume from a checkpoint written by an interrupted run.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop after this many global steps.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Accept unknown keys in the dataset.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct FinetuneArgs {
    /// Pre-trained checkpoint (.gmvp).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Labeled dataset (JSONL).
    #[arg(long)]
    dataset: PathBuf,
    /// Report JSON output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// frozen | full (the probe subcommand is always frozen).
    #[arg(long, default_value = "full")]
    mode: String,
    /// auto | binary | multiclass | regression.
    #[arg(long, default_value = "auto")]
    task: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    /// infonce | ebm_nce | vrr | rr | attr_mask | combined | combined_c |
    /// all.
    #[arg(long, default_value = "all")]
    loss: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct MiBenchArgs {
    #[arg(long, default_value_t = 0.8)]
    rho: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds to run and aggregate.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Report JSON output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblationArgs {
    /// Labeled dataset (JSONL); generated on the fly when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Synthetic record count when no dataset is given.
    #[arg(long, default_value_t = 400)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds per cell.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Pre-training epochs per cell.
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    /// Encoder width for the grid runs.
    #[arg(long, default_value_t = 32)]
    hidden_dim: usize,
    /// Report JSON output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lenient: bool,
}

/// Exit code for a failure: 2 for bad input (flags, configs, files that we
/// reject at the door), 1 for runtime failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } => 2,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Pretrain(args) => cmd_pretrain(args),
        Command::Finetune(args) => cmd_finetune(args, None),
        Command::Probe(args) => cmd_finetune(args, Some(ProbeMode::FrozenLinearProbe)),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::MiBench(args) => cmd_mi_bench(args),
        Command::Ablation(args) => cmd_ablation(args),
    }
}

fn parse_mode_flag(lenient: bool) -> ParseMode {
    if lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    }
}

fn read_dataset(path: &Path, lenient: bool) -> Result<Vec<MoleculeRecord>> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "dataset file not found: {}",
            path.display()
        )));
    }
    Ok(load_dataset(path, parse_mode_flag(lenient))?.records)
}

fn synth_task(s: &str) -> Result<SynthTask> {
    match s {
        "diameter" => Ok(SynthTask::Diameter),
        "contact" => Ok(SynthTask::Contact),
        other => Err(Error::Config(format!("unknown synth task `{other}`"))),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let kind = match args.kind.as_str() {
        "chain" => SynthKind::Chain,
        "ring" => SynthKind::Ring,
        "branched" => SynthKind::Branched,
        "mixed" => SynthKind::Mixed,
        other => return Err(Error::Config(format!("unknown synth kind `{other}`"))),
    };
    let task = synth_task(&args.task)?;
    let spec = SynthSpec {
        kind,
        count: args.count,
        atoms_min: args.atoms_min,
        atoms_max: args.atoms_max,
        noise: args.noise,
        seed: args.seed,
    };
    let output = gen_synthetic(&spec)?;
    let (header, records) = output.labeled(task);
    write_jsonl(&args.out, Some(&header), &records)?;
    println!(
        "wrote {} records to {} (task {}, contact rate {:.3})",
        records.len(),
        args.out.display(),
        task.as_str(),
        output.contact_rate()
    );
    Ok(())
}

fn apply_loss_override(config: &mut TrainConfig, loss: &str) -> Result<()> {
    match loss {
        "infonce" => {
            config.loss.contrastive = ContrastiveKind::Infonce;
            config.loss.generative = GenerativeKind::None;
        }
        "ebm_nce" => {
            config.loss.contrastive = ContrastiveKind::EbmNce;
            config.loss.generative = GenerativeKind::None;
        }
        "vrr" => {
            config.loss.contrastive = ContrastiveKind::None;
            config.loss.generative = GenerativeKind::Vrr;
        }
        "rr" => {
            config.loss.contrastive = ContrastiveKind::None;
            config.loss.generative = GenerativeKind::Rr;
        }
        "combined" => {
            config.loss.contrastive = ContrastiveKind::EbmNce;
            config.loss.generative = GenerativeKind::Vrr;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown loss `{other}`; expected infonce, ebm_nce, vrr, rr or combined"
            )))
        }
    }
    Ok(())
}

fn apply_variant_override(config: &mut TrainConfig, variant: &str) -> Result<()> {
    config.loss.variant = match variant {
        "plain" => Variant::Plain,
        "G" | "g" => Variant::G,
        "C" | "c" => Variant::C,
        other => return Err(Error::Config(format!("unknown variant `{other}`"))),
    };
    Ok(())
}

fn cmd_pretrain(args: PretrainArgs) -> Result<()> {
    if !args.config.exists() {
        return Err(Error::Config(format!(
            "config file not found: {}",
            args.config.display()
        )));
    }
    let config_text = std::fs::read_to_string(&args.config)?;
    let mut config: TrainConfig = serde_json::from_str(&config_text)
        .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(loss) = &args.loss {
        apply_loss_override(&mut config, loss)?;
    }
    if let Some(variant) = &args.variant {
        apply_variant_override(&mut config, variant)?;
    }
    config.validate()?;

    let dataset = read_dataset(&args.dataset, args.lenient)?;
    let resume = match &args.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            config = ckpt.config.clone();
            Some(ckpt)
        }
        None => None,
    };

    std::fs::create_dir_all(&args.out)?;
    let outcome = pretrain_with(
        &dataset,
        &config,
        PretrainOptions {
            resume,
            stop_after_steps: args.max_steps,
        },
    )?;
    let model_path = args.out.join("model.gmvp");
    save_checkpoint(&model_path, &outcome.checkpoint)?;
    let metrics_path = args.out.join("metrics.jsonl");
    outcome.metrics.write(&metrics_path)?;
    let last = outcome.metrics.records().last();
    println!(
        "pre-trained {} steps; final loss {:.6}; wrote {} and {}",
        outcome.checkpoint.step,
        last.map(|r| r.loss).unwrap_or(f64::NAN),
        model_path.display(),
        metrics_path.display()
    );
    Ok(())
}

fn probe_task(name: &str, labels: &[f64]) -> Result<ProbeTask> {
    match name {
        "auto" => Ok(ProbeTask::infer(labels)),
        "binary" => Ok(ProbeTask::Binary),
        "regression" => Ok(ProbeTask::Regression),
        "multiclass" => match ProbeTask::infer(labels) {
            t @ ProbeTask::MultiClass { .. } => Ok(t),
            ProbeTask::Binary => Ok(ProbeTask::MultiClass { classes: 2 }),
            ProbeTask::Regression => Err(Error::Config(
                "labels are not small non-negative integers".into(),
            )),
        },
        other => Err(Error::Config(format!("unknown task `{other}`"))),
    }
}

fn cmd_finetune(args: FinetuneArgs, forced_mode: Option<ProbeMode>) -> Result<()> {
    if !args.checkpoint.exists() {
        return Err(Error::Config(format!(
            "checkpoint file not found: {}",
            args.checkpoint.display()
        )));
    }
    let mode = match forced_mode {
        Some(mode) => mode,
        None => match args.mode.as_str() {
            "frozen" => ProbeMode::FrozenLinearProbe,
            "full" => ProbeMode::FullFinetune,
            other => return Err(Error::Config(format!("unknown mode `{other}`"))),
        },
    };
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let dataset = read_dataset(&args.dataset, args.lenient)?;
    let labels: Vec<f64> = dataset.iter().filter_map(|r| r.label).collect();
    if labels.len() != dataset.len() {
        return Err(Error::Train("dataset has unlabeled records".into()));
    }
    let task = probe_task(&args.task, &labels)?;

    let defaults = match mode {
        ProbeMode::FrozenLinearProbe => ProbeConfig::default(),
        ProbeMode::FullFinetune => ProbeConfig {
            epochs: 20,
            lr: 1e-3,
            ..ProbeConfig::default()
        },
    };
    let pcfg = ProbeConfig {
        epochs: args.epochs.unwrap_or(defaults.epochs),
        lr: args.lr.unwrap_or(defaults.lr),
        batch_size: args.batch_size,
        seed: args.seed,
        ..defaults
    };

    let outcome = finetune_probe(&ckpt, &dataset, mode, task, &pcfg)?;
    for (name, value) in &outcome.metrics {
        println!("{name}: {value:.6}");
    }
    if let Some(out) = &args.out {
        let (metric, task_name) = match task {
            ProbeTask::Binary => ("roc_auc", "binary".to_string()),
            ProbeTask::MultiClass { classes } => ("accuracy", format!("{classes}-class")),
            ProbeTask::Regression => ("rmse", "regression".to_string()),
        };
        let report = EvalReport::new(
            &task_name,
            metric,
            vec![outcome.metrics[metric]],
            &(&ckpt.config, pcfg.seed),
        )?;
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let results = if args.loss == "all" {
        all_loss_grad_checks(args.seed)?
    } else {
        let loss = parse_loss_or_error(&args.loss)?;
        vec![(loss.name(), loss_grad_check(loss, args.seed)?)]
    };
    let mut worst: f64 = 0.0;
    for (name, err) in &results {
        let status = if *err < GRAD_CHECK_TOLERANCE {
            "ok"
        } else {
            "FAIL"
        };
        println!("{name}: max relative error {err:.3e} [{status}]");
        worst = worst.max(*err);
    }
    if worst >= GRAD_CHECK_TOLERANCE {
        return Err(Error::Train(format!(
            "gradient check failed: max relative error {worst:.3e} >= {GRAD_CHECK_TOLERANCE:.0e}"
        )));
    }
    Ok(())
}

fn cmd_mi_bench(args: MiBenchArgs) -> Result<()> {
    if args.seeds == 0 {
        return Err(Error::Config("--seeds must be >= 1".into()));
    }
    let base = MiBenchConfig {
        rho: args.rho,
        dim: args.dim,
        batch: args.batch,
        steps: args.steps,
        seed: args.seed,
        ..MiBenchConfig::default()
    };
    base.validate()?;
    let mut per_seed = Vec::new();
    for offset in 0..args.seeds {
        let cfg = MiBenchConfig {
            seed: args.seed + offset,
            ..base.clone()
        };
        let out = mi_bench(&cfg)?;
        println!(
            "seed {}: estimate {:.4} nats (true {:.4}, bound ln K = {:.4}, max step {:.4})",
            cfg.seed,
            out.estimate,
            out.true_mi,
            out.log_k,
            out.max_step_estimate()
        );
        per_seed.push(out.estimate);
    }
    let report = EvalReport::new("mi_bench", "mi_nats", per_seed, &base)?;
    println!("mean estimate {:.4} nats", report.value);
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_ablation(args: AblationArgs) -> Result<()> {
    if args.seeds == 0 {
        return Err(Error::Config("--seeds must be >= 1".into()));
    }
    let dataset = match &args.dataset {
        Some(path) => read_dataset(path, args.lenient)?,
        None => {
            let spec = SynthSpec {
                count: args.count,
                seed: args.seed,
                ..SynthSpec::default()
            };
            let output = gen_synthetic(&spec)?;
            output.labeled(SynthTask::Diameter).1
        }
    };
    let labels: Vec<f64> = dataset.iter().filter_map(|r| r.label).collect();
    if labels.len() != dataset.len() {
        return Err(Error::Train("dataset has unlabeled records".into()));
    }
    let task = ProbeTask::infer(&labels);

    let base = TrainConfig {
        seed: args.seed,
        epochs: args.epochs,
        gin: crate::encoders::GinConfig {
            hidden_dim: args.hidden_dim,
            ..crate::encoders::GinConfig::default()
        },
        schnet: crate::encoders::SchNetConfig {
            hidden_dim: args.hidden_dim,
            ..crate::encoders::SchNetConfig::default()
        },
        ..TrainConfig::default()
    };
    base.validate()?;
    let probe_cfg = ProbeConfig::default();
    let seeds: Vec<u64> = (0..args.seeds).map(|o| args.seed + o).collect();

    let report = run_ablation(&dataset, &base, &probe_cfg, task, &seeds)?;
    println!(
        "objective ablation ({} over {} seeds):",
        report.metric,
        seeds.len()
    );
    for cell in &report.cells {
        println!("  {:<18} {:.4}  {:?}", cell.name, cell.mean, cell.per_seed);
    }
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
