//! Self-supervised objectives over paired 2D/3D representations.
//!
//! Contrastive losses treat the batch's (2D, 3D) pairs of the same molecule
//! as positives and everything else as negatives. The generative loss (VRR)
//! reconstructs each view's representation from the counterpart's latent
//! code under a stop-gradient target; RR is its deterministic ablation.
//! The combined objective weights the pieces and optionally adds a 2D-only
//! term (attribute masking or a two-view 2D contrastive loss).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;
use crate::tape::{Tape, VarId};
use crate::tensor::Tensor;

use crate::encoders::{
    one_hot, project, reparameterize, reparameterize_deterministic, HeadSide, LatentSample,
};

/// Paired batch representations: row i of `hx` (2D) matches row i of `hy`
/// (3D). Contrastive losses need at least two rows.
#[derive(Clone, Copy, Debug)]
pub struct BatchReprs {
    pub hx: VarId,
    pub hy: VarId,
}

fn batch_size(tape: &Tape, batch: &BatchReprs) -> Result<usize> {
    let (sx, sy) = (tape.value(batch.hx).shape(), tape.value(batch.hy).shape());
    if sx.len() != 2 || sy.len() != 2 || sx != sy {
        return Err(Error::Shape(format!(
            "batch representations must be equal-shape matrices, got {sx:?} and {sy:?}"
        )));
    }
    Ok(sx[0])
}

fn require_pairs(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Train(format!(
            "contrastive losses need a batch of at least 2, got {k}"
        )));
    }
    Ok(())
}

/// Inner-product score between two representation vectors; symmetric.
pub fn score(tape: &mut Tape, hx: VarId, hy: VarId) -> Result<VarId> {
    let p = tape.mul(hx, hy)?;
    tape.sum(p, None)
}

/// All pairwise scores: `S[i][j] = <hx_i, hy_j>`.
pub fn score_matrix(tape: &mut Tape, batch: &BatchReprs) -> Result<VarId> {
    let hy_t = tape.transpose(batch.hy)?;
    tape.matmul(batch.hx, hy_t)
}

fn identity_leaf(tape: &mut Tape, k: usize) -> VarId {
    let mut data = vec![0.0; k * k];
    for i in 0..k {
        data[i * k + i] = 1.0;
    }
    tape.leaf(Tensor::new(vec![k, k], data).expect("identity"))
}

/// Diagonal of a square score matrix as a vector `[K]`.
fn diagonal(tape: &mut Tape, s: VarId, k: usize) -> Result<VarId> {
    let eye = identity_leaf(tape, k);
    let masked = tape.mul(s, eye)?;
    tape.sum(masked, Some(1))
}

/// Softmax cross-entropy contrastive loss, both anchoring directions
/// averaged, computed through logsumexp. Non-negative; log K when every
/// score ties.
pub fn infonce(tape: &mut Tape, batch: &BatchReprs) -> Result<VarId> {
    let k = batch_size(tape, batch)?;
    require_pairs(k)?;
    let s = score_matrix(tape, batch)?;
    // Column i holds the scores of every 2D row against y_i (x-anchored
    // denominator); row i against x_i (y-anchored).
    let lse_cols = tape.logsumexp(s, Some(0))?;
    let lse_rows = tape.logsumexp(s, Some(1))?;
    let diag = diagonal(tape, s, k)?;
    let mean_cols = tape.mean(lse_cols, None)?;
    let mean_rows = tape.mean(lse_rows, None)?;
    let mean_diag = tape.mean(diag, None)?;
    let halves = tape.add(mean_cols, mean_rows)?;
    let halves = tape.scale(halves, 0.5)?;
    tape.sub(halves, mean_diag)
}

/// How negatives are drawn for the binary-cross-entropy loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NegativeStrategy {
    /// Shuffle the batch with no fixed point; one negative per anchor.
    InBatchDerangement,
}

/// Draws the negative pairing for [`ebm_nce`].
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    pub strategy: NegativeStrategy,
    pub rng: Rng,
}

impl NegativeSampler {
    pub fn in_batch(rng: Rng) -> Self {
        NegativeSampler {
            strategy: NegativeStrategy::InBatchDerangement,
            rng,
        }
    }

    /// Indices j != i for every anchor i.
    pub fn draw(&mut self, k: usize) -> Vec<usize> {
        match self.strategy {
            NegativeStrategy::InBatchDerangement => self.rng.derangement(k),
        }
    }
}

/// Binary cross-entropy contrastive loss with one derangement negative per
/// anchor in each direction. `2 ln 2` when every score is zero.
///
/// Unlike the softmax loss, this one is not invariant to adding a constant
/// to every score: the sigmoid reads absolute score values, not contrasts.
pub fn ebm_nce(
    tape: &mut Tape,
    batch: &BatchReprs,
    sampler: &mut NegativeSampler,
) -> Result<VarId> {
    let k = batch_size(tape, batch)?;
    require_pairs(k)?;
    let x_neg = sampler.draw(k);
    let y_neg = sampler.draw(k);
    ebm_nce_with(tape, batch, &x_neg, &y_neg)
}

/// [`ebm_nce`] with explicit negative pairings: anchor i's negative 2D view
/// is row `x_neg[i]`, its negative 3D view row `y_neg[i]`.
pub fn ebm_nce_with(
    tape: &mut Tape,
    batch: &BatchReprs,
    x_neg: &[usize],
    y_neg: &[usize],
) -> Result<VarId> {
    let k = batch_size(tape, batch)?;
    require_pairs(k)?;
    for (i, (&p, &q)) in x_neg.iter().zip(y_neg).enumerate() {
        if p == i || q == i || p >= k || q >= k {
            return Err(Error::Train(format!(
                "negative pairing must avoid the anchor: i={i}, x_neg={p}, y_neg={q}"
            )));
        }
    }
    let s = score_matrix(tape, batch)?;
    let diag = diagonal(tape, s, k)?;

    // Scores of the deranged pairs: f(x_neg_i, y_i) = S[x_neg[i]][i] and
    // f(x_i, y_neg_i) = S[i][y_neg[i]], picked out with selection masks.
    let mut xsel = vec![0.0; k * k];
    for (i, &p) in x_neg.iter().enumerate() {
        xsel[p * k + i] = 1.0;
    }
    let xsel = tape.leaf(Tensor::new(vec![k, k], xsel)?);
    let sx = tape.mul(s, xsel)?;
    let s_xneg = tape.sum(sx, Some(0))?;

    let mut ysel = vec![0.0; k * k];
    for (i, &q) in y_neg.iter().enumerate() {
        ysel[i * k + q] = 1.0;
    }
    let ysel = tape.leaf(Tensor::new(vec![k, k], ysel)?);
    let sy = tape.mul(s, ysel)?;
    let s_yneg = tape.sum(sy, Some(1))?;

    // -log sigmoid(s) = softplus(-s); -log(1 - sigmoid(s)) = softplus(s).
    let neg_diag = tape.neg(diag)?;
    let pos_term = tape.softplus(neg_diag)?;
    let xneg_term = tape.softplus(s_xneg)?;
    let yneg_term = tape.softplus(s_yneg)?;

    let dir_x = tape.add(pos_term, xneg_term)?;
    let dir_y = tape.add(pos_term, yneg_term)?;
    let dir_x = tape.mean(dir_x, None)?;
    let dir_y = tape.mean(dir_y, None)?;
    let sum = tape.add(dir_x, dir_y)?;
    tape.scale(sum, 0.5)
}

/// KL(N(mu, diag sigma^2) || N(0, I)) summed over the latent axis:
/// `sum_l 0.5 (mu_l^2 + sigma_l^2 - 1 - log sigma_l^2)`.
///
/// For a matrix `[K x L]` the result is per-row `[K]`; for a vector `[L]`
/// it is a scalar.
pub fn kl_diag_gaussian(tape: &mut Tape, mu: VarId, sigma: VarId) -> Result<VarId> {
    if tape.value(sigma).data().iter().any(|&s| s <= 0.0) {
        return Err(Error::Domain("kl: sigma must be strictly positive".into()));
    }
    let rank = tape.value(mu).shape().len();
    let mu2 = tape.square(mu)?;
    let sig2 = tape.square(sigma)?;
    let log_sig = tape.log(sigma)?;
    let two_log_sig = tape.scale(log_sig, 2.0)?;
    let t = tape.add(mu2, sig2)?;
    let t = tape.add_scalar(t, -1.0)?;
    let t = tape.sub(t, two_log_sig)?;
    let t = tape.scale(t, 0.5)?;
    match rank {
        1 => tape.sum(t, None),
        2 => tape.sum(t, Some(1)),
        r => Err(Error::Shape(format!("kl: rank {r} unsupported"))),
    }
}

fn mean_sq_distance_rows(tape: &mut Tape, a: VarId, b: VarId) -> Result<VarId> {
    let diff = tape.sub(a, b)?;
    let sq = tape.square(diff)?;
    let per_row = tape.sum(sq, Some(1))?;
    tape.mean(per_row, None)
}

fn vrr_core(
    tape: &mut Tape,
    store: &ParamStore,
    heads_prefix: &str,
    batch: &BatchReprs,
    targets: (VarId, VarId),
    beta: f64,
    mut draw: impl FnMut(&mut Tape, HeadSide, VarId) -> Result<LatentSample>,
) -> Result<VarId> {
    let (target_for_x, target_for_y) = targets;
    let sample_x = draw(tape, HeadSide::X, batch.hx)?;
    let sample_y = draw(tape, HeadSide::Y, batch.hy)?;
    let rec_x = project(tape, store, heads_prefix, HeadSide::X, sample_x.z)?;
    let rec_y = project(tape, store, heads_prefix, HeadSide::Y, sample_y.z)?;

    let mse_x = mean_sq_distance_rows(tape, rec_x, target_for_x)?;
    let mse_y = mean_sq_distance_rows(tape, rec_y, target_for_y)?;
    let rec = tape.add(mse_x, mse_y)?;
    let mut loss = tape.scale(rec, 0.5)?;

    if beta != 0.0 {
        let kl_x = kl_diag_gaussian(tape, sample_x.mu, sample_x.sigma)?;
        let kl_y = kl_diag_gaussian(tape, sample_y.mu, sample_y.sigma)?;
        let kl_x = tape.mean(kl_x, None)?;
        let kl_y = tape.mean(kl_y, None)?;
        let kl = tape.add(kl_x, kl_y)?;
        let kl = tape.scale(kl, beta / 2.0)?;
        loss = tape.add(loss, kl)?;
    }
    Ok(loss)
}

/// Variational representation reconstruction: each view's latent code is
/// reparameterized (`z = mu + sigma * eps`), projected into the counterpart
/// representation space, and matched to the stop-gradient target by squared
/// L2; plus `beta/2` times the KL of both posteriors against N(0, I). The
/// target-side encoder receives no gradient from the reconstruction terms.
pub fn vrr(
    tape: &mut Tape,
    store: &ParamStore,
    heads_prefix: &str,
    batch: &BatchReprs,
    beta: f64,
    rng: &mut Rng,
) -> Result<VarId> {
    let target_for_x = tape.stop_grad(batch.hy);
    let target_for_y = tape.stop_grad(batch.hx);
    vrr_core(
        tape,
        store,
        heads_prefix,
        batch,
        (target_for_x, target_for_y),
        beta,
        |tape, side, h| reparameterize(tape, store, heads_prefix, side, h, rng),
    )
}

/// [`vrr`] with the stop-gradient unrolled: reconstruction targets are the
/// supplied constants instead of detached live representations. At the point
/// where the targets equal the current representations this has the same
/// value and the same gradient as [`vrr`], but it stays a plain function of
/// the parameters under perturbation, which is what central-difference
/// gradient verification needs.
pub fn vrr_frozen_targets(
    tape: &mut Tape,
    store: &ParamStore,
    heads_prefix: &str,
    batch: &BatchReprs,
    target_for_x: VarId,
    target_for_y: VarId,
    beta: f64,
    rng: &mut Rng,
) -> Result<VarId> {
    vrr_core(
        tape,
        store,
        heads_prefix,
        batch,
        (target_for_x, target_for_y),
        beta,
        |tape, side, h| reparameterize(tape, store, heads_prefix, side, h, rng),
    )
}

/// Representation reconstruction: [`vrr`] with the noise pinned to zero and
/// no KL term. Shares the exact code path, so the equality is bit-for-bit.
pub fn rr(
    tape: &mut Tape,
    store: &ParamStore,
    heads_prefix: &str,
    batch: &BatchReprs,
) -> Result<VarId> {
    let target_for_x = tape.stop_grad(batch.hy);
    let target_for_y = tape.stop_grad(batch.hx);
    vrr_core(
        tape,
        store,
        heads_prefix,
        batch,
        (target_for_x, target_for_y),
        0.0,
        |tape, side, h| reparameterize_deterministic(tape, store, heads_prefix, side, h),
    )
}

/// [`rr`] with explicit constant targets; see [`vrr_frozen_targets`].
pub fn rr_frozen_targets(
    tape: &mut Tape,
    store: &ParamStore,
    heads_prefix: &str,
    batch: &BatchReprs,
    target_for_x: VarId,
    target_for_y: VarId,
) -> Result<VarId> {
    vrr_core(
        tape,
        store,
        heads_prefix,
        batch,
        (target_for_x, target_for_y),
        0.0,
        |tape, side, h| reparameterize_deterministic(tape, store, heads_prefix, side, h),
    )
}

/// One molecule's inputs for the masked-attribute 2D objective.
#[derive(Clone, Debug)]
pub struct AttrMaskInput<'a> {
    /// Node representations `[n x d]` of the masked 2D view.
    pub node_reprs: VarId,
    pub masked_indices: &'a [usize],
    /// The true (pre-masking) atom types of the masked nodes, in the same
    /// order as `masked_indices`.
    pub true_types: &'a [u8],
}

/// Register the linear classifier that predicts masked atom types.
pub fn init_attr_head(
    store: &mut ParamStore,
    prefix: &str,
    repr_dim: usize,
    atom_vocab: usize,
    rng: &mut Rng,
) -> Result<()> {
    store.init_linear(
        &format!("{prefix}.w"),
        &format!("{prefix}.b"),
        repr_dim,
        atom_vocab,
        rng,
    )
}

/// Mean cross-entropy of recovering each masked atom's type from its node
/// representation; the mean runs over every masked atom in the batch.
pub fn attr_mask_2d(
    tape: &mut Tape,
    store: &ParamStore,
    attr_prefix: &str,
    inputs: &[AttrMaskInput<'_>],
    atom_vocab: usize,
) -> Result<VarId> {
    let total: usize = inputs.iter().map(|m| m.masked_indices.len()).sum();
    if total == 0 {
        return Err(Error::Train(
            "attr_mask_2d: no masked atoms in batch".into(),
        ));
    }
    let w = tape.param(store, &format!("{attr_prefix}.w"))?;
    let b = tape.param(store, &format!("{attr_prefix}.b"))?;

    let mut sum_ce: Option<VarId> = None;
    for input in inputs {
        if input.masked_indices.is_empty() {
            continue;
        }
        if input.masked_indices.len() != input.true_types.len() {
            return Err(Error::Shape(
                "attr_mask_2d: masked indices and true types disagree".into(),
            ));
        }
        let picked = tape.gather_rows(input.node_reprs, input.masked_indices)?;
        let logits = tape.matmul(picked, w)?;
        let logits = tape.add(logits, b)?;
        let lse = tape.logsumexp(logits, Some(1))?;
        let classes: Vec<usize> = input.true_types.iter().map(|&z| z as usize).collect();
        if let Some(&bad) = classes.iter().find(|&&c| c >= atom_vocab) {
            return Err(Error::Index(format!(
                "attr_mask_2d: class {bad} outside vocabulary of {atom_vocab}"
            )));
        }
        let onehot = tape.leaf(one_hot(&classes, atom_vocab));
        let true_logit_terms = tape.mul(logits, onehot)?;
        let true_logits = tape.sum(true_logit_terms, Some(1))?;
        let ce = tape.sub(lse, true_logits)?;
        let ce_sum = tape.sum(ce, None)?;
        sum_ce = Some(match sum_ce {
            Some(acc) => tape.add(acc, ce_sum)?,
            None => ce_sum,
        });
    }
    tape.scale(sum_ce.expect("total > 0"), 1.0 / total as f64)
}

/// InfoNCE between two independently masked 2D views of the same molecules;
/// the 2D-only contrastive term of the C variant.
pub fn contrastive_2d(tape: &mut Tape, view_a: VarId, view_b: VarId) -> Result<VarId> {
    infonce(
        tape,
        &BatchReprs {
            hx: view_a,
            hy: view_b,
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastiveKind {
    Infonce,
    EbmNce,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerativeKind {
    Vrr,
    Rr,
    None,
}

/// Which 2D-only term the combined objective adds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "plain")]
    Plain,
    #[serde(rename = "G")]
    G,
    #[serde(rename = "C")]
    C,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub contrastive: ContrastiveKind,
    pub generative: GenerativeKind,
    /// Weight of the contrastive term.
    pub alpha1: f64,
    /// Weight of the generative term.
    pub alpha2: f64,
    /// Weight of the 2D-only term (G and C variants).
    pub alpha3: f64,
    /// KL weight inside VRR.
    pub beta: f64,
    pub variant: Variant,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            contrastive: ContrastiveKind::EbmNce,
            generative: GenerativeKind::Vrr,
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
            beta: 1.0,
            variant: Variant::Plain,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("beta", self.beta),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "loss weight {name} = {v} must be finite and non-negative"
                )));
            }
        }
        if self.contrastive == ContrastiveKind::None
            && self.generative == GenerativeKind::None
            && self.variant == Variant::Plain
        {
            return Err(Error::Config("loss config enables no objective".into()));
        }
        Ok(())
    }
}

/// Auxiliary inputs for the 2D-only term of the combined objective.
pub enum Aux2d<'a> {
    None,
    /// Per-molecule masked-node classification inputs (G variant).
    AttrMask {
        inputs: Vec<AttrMaskInput<'a>>,
        atom_vocab: usize,
    },
    /// A second independently masked 2D encoding of the batch (C variant);
    /// contrasted against `first`.
    Contrastive {
        first: VarId,
        second: VarId,
    },
}

/// The weighted total and the unweighted per-term values.
pub struct CombinedLoss {
    pub total: VarId,
    pub terms: Vec<(String, f64)>,
}

/// `alpha1 * L_contrastive + alpha2 * L_generative (+ alpha3 * L_2D)`.
pub fn combined_loss(
    tape: &mut Tape,
    store: &ParamStore,
    heads_prefix: &str,
    batch: &BatchReprs,
    cfg: &LossConfig,
    aux: Aux2d<'_>,
    rng: &mut Rng,
) -> Result<CombinedLoss> {
    cfg.validate()?;
    let mut terms = Vec::new();
    let mut total: Option<VarId> = None;
    let mut push = |tape: &mut Tape,
                    total: &mut Option<VarId>,
                    name: &str,
                    weight: f64,
                    value: VarId|
     -> Result<()> {
        terms.push((name.to_string(), tape.value(value).item()));
        let weighted = tape.scale(value, weight)?;
        *total = Some(match *total {
            Some(acc) => tape.add(acc, weighted)?,
            None => weighted,
        });
        Ok(())
    };

    match cfg.contrastive {
        ContrastiveKind::Infonce => {
            let l = infonce(tape, batch)?;
            push(tape, &mut total, "infonce", cfg.alpha1, l)?;
        }
        ContrastiveKind::EbmNce => {
            let k = batch_size(tape, batch)?;
            require_pairs(k)?;
            let x_neg = rng.derangement(k);
            let y_neg = rng.derangement(k);
            let l = ebm_nce_with(tape, batch, &x_neg, &y_neg)?;
            push(tape, &mut total, "ebm_nce", cfg.alpha1, l)?;
        }
        ContrastiveKind::None => {}
    }

    match cfg.generative {
        GenerativeKind::Vrr => {
            let l = vrr(tape, store, heads_prefix, batch, cfg.beta, rng)?;
            push(tape, &mut total, "vrr", cfg.alpha2, l)?;
        }
        GenerativeKind::Rr => {
            let l = rr(tape, store, heads_prefix, batch)?;
            push(tape, &mut total, "rr", cfg.alpha2, l)?;
        }
        GenerativeKind::None => {}
    }

    match (cfg.variant, aux) {
        (Variant::Plain, _) => {}
        (Variant::G, Aux2d::AttrMask { inputs, atom_vocab }) => {
            let l = attr_mask_2d(tape, store, "attr", &inputs, atom_vocab)?;
            push(tape, &mut total, "attr_mask_2d", cfg.alpha3, l)?;
        }
        (Variant::C, Aux2d::Contrastive { first, second }) => {
            let l = contrastive_2d(tape, first, second)?;
            push(tape, &mut total, "contrastive_2d", cfg.alpha3, l)?;
        }
        (Variant::G, _) => {
            return Err(Error::Config(
                "variant G requires masked-attribute inputs".into(),
            ))
        }
        (Variant::C, _) => {
            return Err(Error::Config(
                "variant C requires a second masked 2D view".into(),
            ))
        }
    }

    let total = match total {
        Some(t) => t,
        None => tape.scalar(0.0),
    };
    Ok(CombinedLoss { total, terms })
}

/// InfoNCE lower bound on mutual information, x-anchored direction:
/// `ln K - (mean_i [lse_j S_ji - S_ii])`, never above `ln K`.
pub fn mi_estimate_infonce(hx: &Tensor, hy: &Tensor) -> Result<f64> {
    let (sx, sy) = (hx.shape(), hy.shape());
    if sx.len() != 2 || sx != sy {
        return Err(Error::Shape(format!(
            "mi estimate needs equal-shape matrices, got {sx:?} and {sy:?}"
        )));
    }
    let (k, d) = (sx[0], sx[1]);
    if k < 2 {
        return Err(Error::Train(
            "mi estimate needs a batch of at least 2".into(),
        ));
    }
    let mut one_sided = 0.0;
    // Anchor pair i: positive S_ii against every S_ji in column i.
    for i in 0..k {
        let hy_i = hy.row(i);
        let mut scores = Vec::with_capacity(k);
        for j in 0..k {
            let hx_j = hx.row(j);
            scores.push((0..d).map(|c| hx_j[c] * hy_i[c]).sum::<f64>());
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        one_sided += lse - scores[i];
    }
    one_sided /= k as f64;
    Ok((k as f64).ln() - one_sided)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{init_heads, HeadConfig};
    use crate::gradcheck::grad_check;

    const LN2: f64 = std::f64::consts::LN_2;

    /// Realize an arbitrary score matrix: with hx = S and hy = I, the
    /// pairwise inner products reproduce S exactly.
    fn batch_with_scores(tape: &mut Tape, s: &[Vec<f64>]) -> BatchReprs {
        let k = s.len();
        let flat: Vec<f64> = s.iter().flatten().cloned().collect();
        let hx = tape.leaf(Tensor::new(vec![k, k], flat).unwrap());
        let hy = identity_leaf(tape, k);
        BatchReprs { hx, hy }
    }

    fn random_scores(rng: &mut Rng, k: usize, scale: f64) -> Vec<Vec<f64>> {
        (0..k)
            .map(|_| (0..k).map(|_| rng.normal() * scale).collect())
            .collect()
    }

    /// Double-loop softmax cross-entropy reference for the symmetric
    /// contrastive loss.
    fn infonce_oracle(s: &[Vec<f64>]) -> f64 {
        let k = s.len();
        let mut total = 0.0;
        for i in 0..k {
            let col: Vec<f64> = (0..k).map(|j| s[j][i]).collect();
            let row: Vec<f64> = s[i].clone();
            total += s[i][i] - lse(&col);
            total += s[i][i] - lse(&row);
        }
        -total / (2.0 * k as f64)
    }

    fn lse(xs: &[f64]) -> f64 {
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Per-pair binary cross-entropy reference.
    fn ebm_nce_oracle(s: &[Vec<f64>], x_neg: &[usize], y_neg: &[usize]) -> f64 {
        let k = s.len();
        let mut dir_x = 0.0;
        let mut dir_y = 0.0;
        for i in 0..k {
            dir_x += sigmoid(s[i][i]).ln() + (1.0 - sigmoid(s[x_neg[i]][i])).ln();
            dir_y += sigmoid(s[i][i]).ln() + (1.0 - sigmoid(s[i][y_neg[i]])).ln();
        }
        -0.5 * (dir_x + dir_y) / k as f64
    }

    #[test]
    fn score_cases() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(vec![1.0, 0.0]));
        let b = tape.leaf(Tensor::vector(vec![0.0, 1.0]));
        let s = score(&mut tape, a, b).unwrap();
        assert_eq!(tape.value(s).item(), 0.0);

        let h = tape.leaf(Tensor::vector(vec![3.0, -4.0]));
        let hh = score(&mut tape, h, h).unwrap();
        assert_eq!(tape.value(hh).item(), 25.0);

        let mut rng = Rng::from_seed(1);
        for _ in 0..10 {
            let x = Tensor::uniform(&[5], 2.0, &mut rng);
            let y = Tensor::uniform(&[5], 2.0, &mut rng);
            let xv = tape.leaf(x.clone());
            let yv = tape.leaf(y.clone());
            let ab = score(&mut tape, xv, yv).unwrap();
            let ba = score(&mut tape, yv, xv).unwrap();
            assert_eq!(tape.value(ab).item(), tape.value(ba).item());
        }
    }

    #[test]
    fn infonce_two_pairs_equal_scores_is_ln2() {
        let mut tape = Tape::new();
        let batch = batch_with_scores(&mut tape, &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let loss = infonce(&mut tape, &batch).unwrap();
        assert!((tape.value(loss).item() - LN2).abs() < 1e-12);
    }

    #[test]
    fn infonce_saturated_is_zero() {
        let mut tape = Tape::new();
        let s = vec![
            vec![40.0, -40.0, -40.0],
            vec![-40.0, 40.0, -40.0],
            vec![-40.0, -40.0, 40.0],
        ];
        let batch = batch_with_scores(&mut tape, &s);
        let loss = infonce(&mut tape, &batch).unwrap();
        assert!(tape.value(loss).item() < 1e-12);
    }

    #[test]
    fn infonce_matches_oracle() {
        let mut rng = Rng::from_seed(2);
        for _ in 0..30 {
            let k = 2 + rng.below(6);
            let s = random_scores(&mut rng, k, 2.0);
            let mut tape = Tape::new();
            let batch = batch_with_scores(&mut tape, &s);
            let loss = infonce(&mut tape, &batch).unwrap();
            let got = tape.value(loss).item();
            let want = infonce_oracle(&s);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            assert!(got >= 0.0);
        }
    }

    #[test]
    fn infonce_rejects_single_pair() {
        let mut tape = Tape::new();
        let batch = batch_with_scores(&mut tape, &[vec![1.0]]);
        assert!(infonce(&mut tape, &batch).is_err());
    }

    #[test]
    fn infonce_batch_permutation_invariance() {
        let mut rng = Rng::from_seed(3);
        for _ in 0..20 {
            let k = 3 + rng.below(4);
            let d = 4;
            let hx_t = Tensor::uniform(&[k, d], 1.5, &mut rng);
            let hy_t = Tensor::uniform(&[k, d], 1.5, &mut rng);
            let mut perm: Vec<usize> = (0..k).collect();
            rng.shuffle(&mut perm);
            let permute = |t: &Tensor| {
                let mut data = Vec::with_capacity(k * d);
                for &i in &perm {
                    data.extend_from_slice(t.row(i));
                }
                Tensor::new(vec![k, d], data).unwrap()
            };
            let mut t1 = Tape::new();
            let b1 = BatchReprs {
                hx: t1.leaf(hx_t.clone()),
                hy: t1.leaf(hy_t.clone()),
            };
            let l1 = infonce(&mut t1, &b1).unwrap();
            let mut t2 = Tape::new();
            let b2 = BatchReprs {
                hx: t2.leaf(permute(&hx_t)),
                hy: t2.leaf(permute(&hy_t)),
            };
            let l2 = infonce(&mut t2, &b2).unwrap();
            assert!((t1.value(l1).item() - t2.value(l2).item()).abs() < 1e-12);
        }
    }

    #[test]
    fn infonce_score_shift_invariance() {
        // Appending a constant column to both sides adds a constant to every
        // score; the softmax loss must not move.
        let mut rng = Rng::from_seed(4);
        for _ in 0..10 {
            let k = 3 + rng.below(3);
            let d = 4;
            let hx_t = Tensor::uniform(&[k, d], 1.0, &mut rng);
            let hy_t = Tensor::uniform(&[k, d], 1.0, &mut rng);
            let c = rng.normal() * 5.0;
            let widen = |t: &Tensor, v: f64| {
                let mut data = Vec::with_capacity(k * (d + 1));
                for i in 0..k {
                    data.extend_from_slice(t.row(i));
                    data.push(v);
                }
                Tensor::new(vec![k, d + 1], data).unwrap()
            };
            let mut t1 = Tape::new();
            let b1 = BatchReprs {
                hx: t1.leaf(hx_t.clone()),
                hy: t1.leaf(hy_t.clone()),
            };
            let l1 = infonce(&mut t1, &b1).unwrap();
            let mut t2 = Tape::new();
            let b2 = BatchReprs {
                hx: t2.leaf(widen(&hx_t, c)),
                hy: t2.leaf(widen(&hy_t, 1.0)),
            };
            let l2 = infonce(&mut t2, &b2).unwrap();
            assert!((t1.value(l1).item() - t2.value(l2).item()).abs() < 1e-12);
        }
    }

    #[test]
    fn ebm_nce_all_zero_scores_is_2ln2() {
        let mut tape = Tape::new();
        let batch = batch_with_scores(&mut tape, &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let loss = ebm_nce_with(&mut tape, &batch, &[1, 0], &[1, 0]).unwrap();
        assert!((tape.value(loss).item() - 2.0 * LN2).abs() < 1e-12);
    }

    #[test]
    fn ebm_nce_saturated_is_zero() {
        let mut tape = Tape::new();
        let s = vec![
            vec![40.0, -40.0, -40.0],
            vec![-40.0, 40.0, -40.0],
            vec![-40.0, -40.0, 40.0],
        ];
        let batch = batch_with_scores(&mut tape, &s);
        let loss = ebm_nce_with(&mut tape, &batch, &[1, 2, 0], &[2, 0, 1]).unwrap();
        assert!(tape.value(loss).item() < 1e-12);
    }

    #[test]
    fn ebm_nce_matches_oracle() {
        let mut rng = Rng::from_seed(5);
        for _ in 0..30 {
            let k = 2 + rng.below(6);
            let s = random_scores(&mut rng, k, 2.0);
            let x_neg = rng.derangement(k);
            let y_neg = rng.derangement(k);
            let mut tape = Tape::new();
            let batch = batch_with_scores(&mut tape, &s);
            let loss = ebm_nce_with(&mut tape, &batch, &x_neg, &y_neg).unwrap();
            let got = tape.value(loss).item();
            let want = ebm_nce_oracle(&s, &x_neg, &y_neg);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            assert!(got > 0.0);
        }
    }

    #[test]
    fn ebm_nce_sampler_negatives_avoid_anchor() {
        let mut sampler = NegativeSampler::in_batch(Rng::from_seed(6));
        for k in 2..10 {
            let neg = sampler.draw(k);
            assert!(neg.iter().enumerate().all(|(i, &p)| i != p));
        }
    }

    #[test]
    fn ebm_nce_permutation_invariance_with_conjugated_negatives() {
        let mut rng = Rng::from_seed(7);
        for _ in 0..20 {
            let k = 3 + rng.below(4);
            let s = random_scores(&mut rng, k, 1.5);
            let x_neg = rng.derangement(k);
            let y_neg = rng.derangement(k);
            let mut perm: Vec<usize> = (0..k).collect();
            rng.shuffle(&mut perm);

            let mut inv = vec![0usize; k];
            for (old, &new) in perm.iter().enumerate() {
                inv[new] = old;
            }
            // Row old i moves to perm[i]; conjugate the pairing so the same
            // molecules stay negatives of each other.
            let s_p: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..k).map(|j| s[inv[i]][inv[j]]).collect())
                .collect();
            let x_neg_p: Vec<usize> = (0..k).map(|i| perm[x_neg[inv[i]]]).collect();
            let y_neg_p: Vec<usize> = (0..k).map(|i| perm[y_neg[inv[i]]]).collect();

            let mut t1 = Tape::new();
            let b1 = batch_with_scores(&mut t1, &s);
            let l1 = ebm_nce_with(&mut t1, &b1, &x_neg, &y_neg).unwrap();
            let mut t2 = Tape::new();
            let b2 = batch_with_scores(&mut t2, &s_p);
            let l2 = ebm_nce_with(&mut t2, &b2, &x_neg_p, &y_neg_p).unwrap();
            assert!((t1.value(l1).item() - t2.value(l2).item()).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_closed_forms() {
        let mut tape = Tape::new();
        let mu = tape.leaf(Tensor::vector(vec![0.0, 0.0, 0.0]));
        let sigma = tape.leaf(Tensor::vector(vec![1.0, 1.0, 1.0]));
        let kl = kl_diag_gaussian(&mut tape, mu, sigma).unwrap();
        assert!(tape.value(kl).item().abs() < 1e-15);

        let mu = tape.leaf(Tensor::vector(vec![1.0]));
        let sigma = tape.leaf(Tensor::vector(vec![1.0]));
        let kl = kl_diag_gaussian(&mut tape, mu, sigma).unwrap();
        assert!((tape.value(kl).item() - 0.5).abs() < 1e-12);

        let mu = tape.leaf(Tensor::vector(vec![0.5]));
        let sigma = tape.leaf(Tensor::vector(vec![2.0]));
        let kl = kl_diag_gaussian(&mut tape, mu, sigma).unwrap();
        let want = 0.5 * (0.25 + 4.0 - 1.0 - 4f64.ln());
        assert!((tape.value(kl).item() - want).abs() < 1e-12);
    }

    #[test]
    fn kl_monte_carlo_cross_check() {
        // KL(N(0.5, 2^2) || N(0, 1)) by sampling log-density ratios.
        let (mu, sigma) = (0.5, 2.0);
        let mut rng = Rng::from_seed(8);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z = mu + sigma * rng.normal();
            let log_q = -0.5 * ((z - mu) / sigma).powi(2)
                - (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
            let log_p = -0.5 * z * z - (2.0 * std::f64::consts::PI).sqrt().ln();
            acc += log_q - log_p;
        }
        let mc = acc / n as f64;
        let closed = 0.5 * (mu * mu + sigma * sigma - 1.0 - (sigma * sigma).ln());
        assert!((mc - closed).abs() < 1e-2, "mc {mc} vs closed {closed}");
    }

    #[test]
    fn kl_rejects_nonpositive_sigma() {
        let mut tape = Tape::new();
        let mu = tape.leaf(Tensor::vector(vec![0.0]));
        let sigma = tape.leaf(Tensor::vector(vec![0.0]));
        assert!(kl_diag_gaussian(&mut tape, mu, sigma).is_err());
    }

    fn heads_fixture(seed: u64, d: usize) -> (ParamStore, HeadConfig) {
        let cfg = HeadConfig::for_repr_dim(d);
        let mut store = ParamStore::new();
        let mut rng = Rng::from_seed(seed);
        init_heads(&mut store, "heads", &cfg, &mut rng).unwrap();
        (store, cfg)
    }

    #[test]
    fn vrr_is_nonnegative_and_rr_matches_pinned_vrr() {
        let (store, _) = heads_fixture(9, 6);
        let mut rng = Rng::from_seed(10);
        for _ in 0..10 {
            let hx_t = Tensor::uniform(&[3, 6], 1.0, &mut rng);
            let hy_t = Tensor::uniform(&[3, 6], 1.0, &mut rng);

            let mut t1 = Tape::new();
            let b1 = BatchReprs {
                hx: t1.leaf(hx_t.clone()),
                hy: t1.leaf(hy_t.clone()),
            };
            let l1 = rr(&mut t1, &store, "heads", &b1).unwrap();

            // vrr with eps pinned to zero and beta zero goes through the
            // identical code path.
            let mut t2 = Tape::new();
            let b2 = BatchReprs {
                hx: t2.leaf(hx_t.clone()),
                hy: t2.leaf(hy_t.clone()),
            };
            let tx = t2.stop_grad(b2.hy);
            let ty = t2.stop_grad(b2.hx);
            let l2 = vrr_core(
                &mut t2,
                &store,
                "heads",
                &b2,
                (tx, ty),
                0.0,
                |tape, side, h| reparameterize_deterministic(tape, &store, "heads", side, h),
            )
            .unwrap();
            assert_eq!(t1.value(l1).item().to_bits(), t2.value(l2).item().to_bits());

            let mut t3 = Tape::new();
            let b3 = BatchReprs {
                hx: t3.leaf(hx_t.clone()),
                hy: t3.leaf(hy_t.clone()),
            };
            let l3 = vrr(&mut t3, &store, "heads", &b3, 1.0, &mut rng).unwrap();
            assert!(t3.value(l3).item() >= 0.0);
        }
    }

    #[test]
    fn rr_matches_naive_mse_oracle() {
        let (store, cfg) = heads_fixture(11, 5);
        let mut rng = Rng::from_seed(12);
        let k = 4;
        let hx_t = Tensor::uniform(&[k, cfg.repr_dim], 1.0, &mut rng);
        let hy_t = Tensor::uniform(&[k, cfg.repr_dim], 1.0, &mut rng);

        let mut tape = Tape::new();
        let hx = tape.leaf(hx_t.clone());
        let hy = tape.leaf(hy_t.clone());
        let batch = BatchReprs { hx, hy };

        // Reproduce the two projections through the public pieces, then
        // assemble the loss by hand.
        let sx = reparameterize_deterministic(&mut tape, &store, "heads", HeadSide::X, hx).unwrap();
        let sy = reparameterize_deterministic(&mut tape, &store, "heads", HeadSide::Y, hy).unwrap();
        let rec_x = project(&mut tape, &store, "heads", HeadSide::X, sx.z).unwrap();
        let rec_y = project(&mut tape, &store, "heads", HeadSide::Y, sy.z).unwrap();
        let rx = tape.value(rec_x).data().to_vec();
        let ry = tape.value(rec_y).data().to_vec();
        let d = cfg.repr_dim;
        let mut mse_x = 0.0;
        let mut mse_y = 0.0;
        for i in 0..k {
            for c in 0..d {
                mse_x += (rx[i * d + c] - hy_t.data()[i * d + c]).powi(2);
                mse_y += (ry[i * d + c] - hx_t.data()[i * d + c]).powi(2);
            }
        }
        let want = 0.5 * (mse_x / k as f64 + mse_y / k as f64);

        let loss = rr(&mut tape, &store, "heads", &batch).unwrap();
        assert!((tape.value(loss).item() - want).abs() < 1e-12);
    }

    #[test]
    fn vrr_perfect_reconstruction_is_zero() {
        // Force q_x and q_y to ignore z and emit exactly the counterpart
        // representation via their bias: zero weights, bias = target row.
        // Works for a batch of identical rows.
        let (mut store, cfg) = heads_fixture(13, 4);
        let mut rng = Rng::from_seed(14);
        let hx_row: Vec<f64> = (0..cfg.repr_dim).map(|_| rng.normal()).collect();
        let hy_row: Vec<f64> = (0..cfg.repr_dim).map(|_| rng.normal()).collect();
        for (side, target) in [("x", &hy_row), ("y", &hx_row)] {
            for part in ["w1", "b1", "w2"] {
                let name = format!("heads.q_{side}.{part}");
                let shape = store.get(&name).unwrap().shape().to_vec();
                *store.get_mut(&name).unwrap() = Tensor::zeros(&shape);
            }
            *store.get_mut(&format!("heads.q_{side}.b2")).unwrap() = Tensor::vector(target.clone());
        }
        let k = 3;
        let tile = |row: &Vec<f64>| {
            Tensor::new(
                vec![k, cfg.repr_dim],
                row.iter().cycle().take(k * cfg.repr_dim).cloned().collect(),
            )
            .unwrap()
        };
        let mut tape = Tape::new();
        let batch = BatchReprs {
            hx: tape.leaf(tile(&hx_row)),
            hy: tape.leaf(tile(&hy_row)),
        };
        let loss = vrr(&mut tape, &store, "heads", &batch, 0.0, &mut rng).unwrap();
        assert!(tape.value(loss).item() < 1e-24);
    }

    #[test]
    fn vrr_standard_normal_posterior_has_zero_kl() {
        // mu head forced to 0 and sigma head forced to softplus(x) = 1:
        // per-element pre-activation must equal ln(e - 1).
        let (mut store, cfg) = heads_fixture(15, 4);
        for part in ["w1", "b1", "w2", "b2"] {
            for head in ["mu_x", "mu_y"] {
                let name = format!("heads.{head}.{part}");
                let shape = store.get(&name).unwrap().shape().to_vec();
                *store.get_mut(&name).unwrap() = Tensor::zeros(&shape);
            }
        }
        let c = (std::f64::consts::E - 1.0).ln();
        for head in ["sigma_x", "sigma_y"] {
            for part in ["w1", "b1", "w2"] {
                let name = format!("heads.{head}.{part}");
                let shape = store.get(&name).unwrap().shape().to_vec();
                *store.get_mut(&name).unwrap() = Tensor::zeros(&shape);
            }
            *store.get_mut(&format!("heads.{head}.b2")).unwrap() =
                Tensor::full(&[cfg.latent_dim], c);
        }
        let mut rng = Rng::from_seed(16);
        let mut tape = Tape::new();
        let batch = BatchReprs {
            hx: tape.leaf(Tensor::uniform(&[3, cfg.repr_dim], 1.0, &mut rng)),
            hy: tape.leaf(Tensor::uniform(&[3, cfg.repr_dim], 1.0, &mut rng)),
        };
        let sample =
            reparameterize(&mut tape, &store, "heads", HeadSide::X, batch.hx, &mut rng).unwrap();
        let kl = kl_diag_gaussian(&mut tape, sample.mu, sample.sigma).unwrap();
        for &v in tape.value(kl).data() {
            assert!(v.abs() < 1e-12, "kl {v}");
        }
    }

    #[test]
    fn vrr_stop_gradient_blocks_target_side() {
        // hy is produced by a parameter; the y-side posterior and projection
        // are zeroed so hy only reaches the loss inside the stop-gradient.
        // Its gradient must be exactly zero.
        let (mut store, cfg) = heads_fixture(17, 4);
        for head in ["mu_y", "sigma_y", "q_y"] {
            for part in ["w1", "b1", "w2", "b2"] {
                let name = format!("heads.{head}.{part}");
                let shape = store.get(&name).unwrap().shape().to_vec();
                *store.get_mut(&name).unwrap() = Tensor::zeros(&shape);
            }
        }
        let mut rng = Rng::from_seed(18);
        store
            .insert("enc_y", Tensor::uniform(&[2, cfg.repr_dim], 1.0, &mut rng))
            .unwrap();

        let mut tape = Tape::new();
        let hx = tape.leaf(Tensor::uniform(&[2, cfg.repr_dim], 1.0, &mut rng));
        let hy = tape.param(&store, "enc_y").unwrap();
        let batch = BatchReprs { hx, hy };
        let loss = vrr(&mut tape, &store, "heads", &batch, 0.0, &mut rng).unwrap();
        let grads = tape.backward(loss, &store).unwrap();
        assert!(
            grads.get("enc_y").unwrap().data().iter().all(|&g| g == 0.0),
            "stop-gradient must block the target-side encoder"
        );
    }

    fn attr_fixture(seed: u64, d: usize, vocab: usize) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = Rng::from_seed(seed);
        init_attr_head(&mut store, "attr", d, vocab, &mut rng).unwrap();
        store
    }

    #[test]
    fn attr_mask_uniform_logits_give_log_vocab() {
        let (d, vocab) = (5, 9);
        let mut store = attr_fixture(19, d, vocab);
        *store.get_mut("attr.w").unwrap() = Tensor::zeros(&[d, vocab]);
        *store.get_mut("attr.b").unwrap() = Tensor::zeros(&[vocab]);
        let mut rng = Rng::from_seed(20);
        let mut tape = Tape::new();
        let reprs = tape.leaf(Tensor::uniform(&[4, d], 1.0, &mut rng));
        let inputs = [AttrMaskInput {
            node_reprs: reprs,
            masked_indices: &[0, 2],
            true_types: &[6, 8],
        }];
        let loss = attr_mask_2d(&mut tape, &store, "attr", &inputs, vocab).unwrap();
        assert!((tape.value(loss).item() - (vocab as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn attr_mask_saturated_is_zero() {
        let (d, vocab) = (5, 7);
        let mut store = attr_fixture(21, d, vocab);
        *store.get_mut("attr.w").unwrap() = Tensor::zeros(&[d, vocab]);
        let mut b = vec![-40.0; vocab];
        b[3] = 40.0;
        *store.get_mut("attr.b").unwrap() = Tensor::vector(b);
        let mut rng = Rng::from_seed(22);
        let mut tape = Tape::new();
        let reprs = tape.leaf(Tensor::uniform(&[3, d], 1.0, &mut rng));
        let inputs = [AttrMaskInput {
            node_reprs: reprs,
            masked_indices: &[1],
            true_types: &[3],
        }];
        let loss = attr_mask_2d(&mut tape, &store, "attr", &inputs, vocab).unwrap();
        assert!(tape.value(loss).item() < 1e-12);
    }

    #[test]
    fn attr_mask_matches_naive_ce_oracle() {
        let (d, vocab) = (6, 8);
        let store = attr_fixture(23, d, vocab);
        let mut rng = Rng::from_seed(24);
        for _ in 0..10 {
            let n1 = 3 + rng.below(3);
            let n2 = 2 + rng.below(3);
            let r1 = Tensor::uniform(&[n1, d], 1.0, &mut rng);
            let r2 = Tensor::uniform(&[n2, d], 1.0, &mut rng);
            let k1 = 1 + rng.below(n1 - 1);
            let m1: Vec<usize> = rng.sample_distinct(k1, n1);
            let k2 = 1 + rng.below(n2);
            let m2: Vec<usize> = rng.sample_distinct(k2, n2);
            let t1: Vec<u8> = m1.iter().map(|_| 1 + rng.below(vocab - 1) as u8).collect();
            let t2: Vec<u8> = m2.iter().map(|_| 1 + rng.below(vocab - 1) as u8).collect();

            let mut tape = Tape::new();
            let v1 = tape.leaf(r1.clone());
            let v2 = tape.leaf(r2.clone());
            let inputs = [
                AttrMaskInput {
                    node_reprs: v1,
                    masked_indices: &m1,
                    true_types: &t1,
                },
                AttrMaskInput {
                    node_reprs: v2,
                    masked_indices: &m2,
                    true_types: &t2,
                },
            ];
            let loss = attr_mask_2d(&mut tape, &store, "attr", &inputs, vocab).unwrap();

            // Oracle: plain loops over every masked atom.
            let w = store.get("attr.w").unwrap();
            let bias = store.get("attr.b").unwrap().data();
            let mut total = 0.0;
            let mut count = 0usize;
            for (reprs, masked, types) in [(&r1, &m1, &t1), (&r2, &m2, &t2)] {
                for (&atom, &class) in masked.iter().zip(types.iter()) {
                    let row = reprs.row(atom);
                    let logits: Vec<f64> = (0..vocab)
                        .map(|c| {
                            bias[c]
                                + (0..d)
                                    .map(|f| row[f] * w.data()[f * vocab + c])
                                    .sum::<f64>()
                        })
                        .collect();
                    total += lse(&logits) - logits[class as usize];
                    count += 1;
                }
            }
            let want = total / count as f64;
            assert!((tape.value(loss).item() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn attr_mask_empty_set_is_error() {
        let store = attr_fixture(25, 4, 5);
        let mut tape = Tape::new();
        let reprs = tape.leaf(Tensor::zeros(&[3, 4]));
        let inputs = [AttrMaskInput {
            node_reprs: reprs,
            masked_indices: &[],
            true_types: &[],
        }];
        assert!(attr_mask_2d(&mut tape, &store, "attr", &inputs, 5).is_err());
    }

    #[test]
    fn contrastive_2d_identical_rows_give_log_k() {
        let k = 4;
        let mut tape = Tape::new();
        let row: Vec<f64> = vec![0.3, -0.7, 1.1];
        let tile = Tensor::new(
            vec![k, 3],
            row.iter().cycle().take(k * 3).cloned().collect(),
        )
        .unwrap();
        let a = tape.leaf(tile.clone());
        let b = tape.leaf(tile);
        let loss = contrastive_2d(&mut tape, a, b).unwrap();
        assert!((tape.value(loss).item() - (k as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn contrastive_2d_orthonormal_identical_views_beat_log_k() {
        let k = 4;
        let mut tape = Tape::new();
        let eye = identity_leaf(&mut tape, k);
        let loss = contrastive_2d(&mut tape, eye, eye).unwrap();
        assert!(tape.value(loss).item() < (k as f64).ln());
    }

    #[test]
    fn combined_loss_weight_selection_and_zero() {
        let (store, cfg_h) = heads_fixture(26, 4);
        let mut rng = Rng::from_seed(27);
        let hx_t = Tensor::uniform(&[3, cfg_h.repr_dim], 1.0, &mut rng);
        let hy_t = Tensor::uniform(&[3, cfg_h.repr_dim], 1.0, &mut rng);

        // alpha1 = 1, alpha2 = 0: equals the contrastive loss alone.
        let cfg = LossConfig {
            contrastive: ContrastiveKind::Infonce,
            generative: GenerativeKind::Vrr,
            alpha1: 1.0,
            alpha2: 0.0,
            ..LossConfig::default()
        };
        let mut tape = Tape::new();
        let batch = BatchReprs {
            hx: tape.leaf(hx_t.clone()),
            hy: tape.leaf(hy_t.clone()),
        };
        let out = combined_loss(
            &mut tape,
            &store,
            "heads",
            &batch,
            &cfg,
            Aux2d::None,
            &mut rng,
        )
        .unwrap();
        let alone = infonce(&mut tape, &batch).unwrap();
        assert!((tape.value(out.total).item() - tape.value(alone).item()).abs() < 1e-15);

        // All weights zero: total is exactly zero.
        let cfg0 = LossConfig {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
            ..cfg
        };
        let mut tape = Tape::new();
        let batch = BatchReprs {
            hx: tape.leaf(hx_t.clone()),
            hy: tape.leaf(hy_t.clone()),
        };
        let out = combined_loss(
            &mut tape,
            &store,
            "heads",
            &batch,
            &cfg0,
            Aux2d::None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(tape.value(out.total).item(), 0.0);
    }

    #[test]
    fn combined_loss_variant_terms_add_up() {
        let d = 4;
        let (mut store, cfg_h) = heads_fixture(28, d);
        let mut rng = Rng::from_seed(29);
        init_attr_head(&mut store, "attr", d, 6, &mut rng).unwrap();
        let hx_t = Tensor::uniform(&[3, cfg_h.repr_dim], 1.0, &mut rng);
        let hy_t = Tensor::uniform(&[3, cfg_h.repr_dim], 1.0, &mut rng);
        let reprs_t = Tensor::uniform(&[5, d], 1.0, &mut rng);

        let cfg = LossConfig {
            contrastive: ContrastiveKind::Infonce,
            generative: GenerativeKind::Rr,
            variant: Variant::G,
            ..LossConfig::default()
        };
        let mut tape = Tape::new();
        let batch = BatchReprs {
            hx: tape.leaf(hx_t),
            hy: tape.leaf(hy_t),
        };
        let reprs = tape.leaf(reprs_t);
        let masked = [0usize, 3];
        let types = [2u8, 4];
        let aux = Aux2d::AttrMask {
            inputs: vec![AttrMaskInput {
                node_reprs: reprs,
                masked_indices: &masked,
                true_types: &types,
            }],
            atom_vocab: 6,
        };
        let out = combined_loss(&mut tape, &store, "heads", &batch, &cfg, aux, &mut rng).unwrap();
        let sum_terms: f64 = out.terms.iter().map(|(_, v)| v).sum();
        assert_eq!(out.terms.len(), 3);
        assert!((tape.value(out.total).item() - sum_terms).abs() < 1e-12);
    }

    #[test]
    fn combined_loss_linear_in_each_alpha() {
        let d = 4;
        let (store, _) = heads_fixture(30, d);
        let mut rng = Rng::from_seed(31);
        let hx_t = Tensor::uniform(&[3, d], 1.0, &mut rng);
        let hy_t = Tensor::uniform(&[3, d], 1.0, &mut rng);

        // Deterministic kinds so repeated evaluation is exact.
        let base = LossConfig {
            contrastive: ContrastiveKind::Infonce,
            generative: GenerativeKind::Rr,
            variant: Variant::Plain,
            ..LossConfig::default()
        };
        let eval = |alpha1: f64, alpha2: f64| -> f64 {
            let cfg = LossConfig {
                alpha1,
                alpha2,
                ..base.clone()
            };
            let mut rng = Rng::from_seed(0);
            let mut tape = Tape::new();
            let batch = BatchReprs {
                hx: tape.leaf(hx_t.clone()),
                hy: tape.leaf(hy_t.clone()),
            };
            let out = combined_loss(
                &mut tape,
                &store,
                "heads",
                &batch,
                &cfg,
                Aux2d::None,
                &mut rng,
            )
            .unwrap();
            tape.value(out.total).item()
        };
        for (fix, vary) in [(0.7, true), (1.3, false)] {
            let at = |a: f64| if vary { eval(a, fix) } else { eval(fix, a) };
            let (v0, v1, v2) = (at(0.0), at(1.0), at(2.0));
            assert!(
                (v2 - 2.0 * v1 + v0).abs() < 1e-12,
                "not affine: {v0} {v1} {v2}"
            );
            assert!(((v1 - v0) - (v2 - v1)).abs() < 1e-12);
        }
    }

    #[test]
    fn combined_loss_missing_aux_is_error() {
        let (store, _) = heads_fixture(32, 4);
        let mut rng = Rng::from_seed(33);
        let mut tape = Tape::new();
        let batch = BatchReprs {
            hx: tape.leaf(Tensor::uniform(&[2, 4], 1.0, &mut rng)),
            hy: tape.leaf(Tensor::uniform(&[2, 4], 1.0, &mut rng)),
        };
        let cfg = LossConfig {
            variant: Variant::G,
            ..LossConfig::default()
        };
        assert!(combined_loss(
            &mut tape,
            &store,
            "heads",
            &batch,
            &cfg,
            Aux2d::None,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn loss_config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        let nothing = LossConfig {
            contrastive: ContrastiveKind::None,
            generative: GenerativeKind::None,
            variant: Variant::Plain,
            ..LossConfig::default()
        };
        assert!(nothing.validate().is_err());
        let negative = LossConfig {
            alpha1: -1.0,
            ..LossConfig::default()
        };
        assert!(negative.validate().is_err());
    }

    #[test]
    fn mi_estimate_bounded_by_log_k() {
        let mut rng = Rng::from_seed(34);
        for _ in 0..50 {
            let k = 2 + rng.below(16);
            let d = 1 + rng.below(6);
            let hx = Tensor::uniform(&[k, d], 3.0, &mut rng);
            let hy = Tensor::uniform(&[k, d], 3.0, &mut rng);
            let est = mi_estimate_infonce(&hx, &hy).unwrap();
            assert!(est <= (k as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn mi_estimate_near_zero_for_independent_inputs() {
        // Independent representations with a small random critic scale:
        // the estimate averaged over 100 batches sits near zero.
        let mut rng = Rng::from_seed(35);
        let (k, d, scale) = (32, 8, 0.2);
        let mut acc = 0.0;
        for _ in 0..100 {
            let draw = |rng: &mut Rng| -> Tensor {
                let data: Vec<f64> = (0..k * d).map(|_| rng.normal() * scale).collect();
                Tensor::new(vec![k, d], data).unwrap()
            };
            let hx = draw(&mut rng);
            let hy = draw(&mut rng);
            acc += mi_estimate_infonce(&hx, &hy).unwrap();
        }
        let avg = acc / 100.0;
        assert!(avg.abs() < 0.05, "independent-input estimate {avg}");
    }

    #[test]
    fn gradients_of_losses_pass_finite_differences() {
        // Small end-to-end gradient checks at the objective level; the
        // encoders get their own in the acceptance suite.
        let d = 4;
        let (mut store, _) = heads_fixture(36, d);
        let mut rng = Rng::from_seed(37);
        store
            .insert("hx", Tensor::uniform(&[3, d], 1.0, &mut rng))
            .unwrap();
        store
            .insert("hy", Tensor::uniform(&[3, d], 1.0, &mut rng))
            .unwrap();

        let info = |store: &ParamStore| -> Result<(Tape, VarId)> {
            let mut tape = Tape::new();
            let hx = tape.param(store, "hx")?;
            let hy = tape.param(store, "hy")?;
            let loss = infonce(&mut tape, &BatchReprs { hx, hy })?;
            Ok((tape, loss))
        };
        assert!(grad_check(&store, 1e-5, &info).unwrap() < 1e-6);

        let nce = |store: &ParamStore| -> Result<(Tape, VarId)> {
            let mut tape = Tape::new();
            let hx = tape.param(store, "hx")?;
            let hy = tape.param(store, "hy")?;
            let loss = ebm_nce_with(&mut tape, &BatchReprs { hx, hy }, &[1, 2, 0], &[2, 0, 1])?;
            Ok((tape, loss))
        };
        assert!(grad_check(&store, 1e-5, &nce).unwrap() < 1e-6);

        // The reconstruction targets are frozen at the base point: the
        // stop-gradient makes the training gradient differ from the full
        // derivative, so the checkable function is the unrolled form.
        let target_for_x = store.get("hy").unwrap().clone();
        let target_for_y = store.get("hx").unwrap().clone();
        let vrr_f = move |store: &ParamStore| -> Result<(Tape, VarId)> {
            let mut tape = Tape::new();
            let hx = tape.param(store, "hx")?;
            let hy = tape.param(store, "hy")?;
            let tx = tape.leaf(target_for_x.clone());
            let ty = tape.leaf(target_for_y.clone());
            // Pinned noise: clone a fixed-seed generator on every call.
            let mut rng = Rng::from_seed(1234);
            let loss = vrr_frozen_targets(
                &mut tape,
                store,
                "heads",
                &BatchReprs { hx, hy },
                tx,
                ty,
                0.7,
                &mut rng,
            )?;
            Ok((tape, loss))
        };
        assert!(grad_check(&store, 1e-5, &vrr_f).unwrap() < 1e-4);

        // At the base point the frozen-target form and the training form
        // agree in value and gradient.
        let mut t1 = Tape::new();
        let hx = t1.param(&store, "hx").unwrap();
        let hy = t1.param(&store, "hy").unwrap();
        let mut rng1 = Rng::from_seed(1234);
        let train_loss = vrr(
            &mut t1,
            &store,
            "heads",
            &BatchReprs { hx, hy },
            0.7,
            &mut rng1,
        )
        .unwrap();
        let train_val = t1.value(train_loss).item();
        let train_grads = t1.backward(train_loss, &store).unwrap();
        let (t2, frozen_loss) = vrr_f(&store).unwrap();
        let frozen_val = t2.value(frozen_loss).item();
        let frozen_grads = t2.backward(frozen_loss, &store).unwrap();
        assert_eq!(train_val.to_bits(), frozen_val.to_bits());
        assert_eq!(train_grads, frozen_grads);
    }
}
