//! Multi-view self-supervised pre-training for molecular graphs.
//!
//! A molecule has two natural views: the 2D bond topology and an ensemble of
//! weighted 3D conformers. This crate pre-trains a 2D message-passing
//! encoder (GIN) against a 3D continuous-filter encoder (SchNet) with
//! contrastive (InfoNCE, EBM-NCE) and generative (VRR, RR) objectives, so
//! that downstream tasks seeing only 2D graphs inherit geometric structure
//! learned during pre-training.
//!
//! Everything is self-contained: dense f64 tensors with tape-based
//! reverse-mode differentiation, a deterministic RNG, a JSONL dataset
//! format, Adam, checkpointing with bit-exact resume, a synthetic dataset
//! generator, and an evaluation harness (linear probes, ROC-AUC/RMSE, a
//! mutual-information benchmark against correlated Gaussians).
//!
//! See the crate examples for runnable tours of each capability, and the
//! `graphmvp` binary for the command-line surface.

pub mod cli;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod molio;
pub mod objectives;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use params::ParamStore;
pub use rng::Rng;
pub use tape::{ElemKind, Gradients, Reduce, Tape, VarId};
pub use tensor::Tensor;
