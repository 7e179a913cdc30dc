//! Evaluation harness: metrics, synthetic datasets, the mutual-information
//! benchmark, and the objective-ablation runner.

mod ablation;
mod metrics;
mod mibench;
mod report;
mod synth;

pub use ablation::{objective_grid, run_ablation, AblationCell, AblationReport};
pub use metrics::{accuracy, rmse, roc_auc};
pub use mibench::{mi_bench, MiBenchConfig, MiBenchOutcome};
pub use report::{config_digest, EvalReport};
pub use synth::{
    contact_flag, diameter_class, gen_synthetic, SynthKind, SynthOutput, SynthRecord, SynthSpec,
    SynthTask, CONTACT_EUCLIDEAN, CONTACT_GRAPH_DISTANCE, DIAMETER_CLASSES,
};
