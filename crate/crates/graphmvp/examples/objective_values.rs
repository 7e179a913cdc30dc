//! Closed-form checkpoints of every objective: the values a correct
//! implementation must hit on degenerate inputs, plus the mutual-information
//! estimator's bound.
//!
//! ```bash
//! cargo run --release --example objective_values
//! ```

use graphmvp::encoders::{init_heads, HeadConfig};
use graphmvp::objectives::{
    ebm_nce_with, infonce, kl_diag_gaussian, mi_estimate_infonce, rr, vrr, BatchReprs,
};
use graphmvp::params::ParamStore;
use graphmvp::rng::Rng;
use graphmvp::tape::Tape;
use graphmvp::tensor::Tensor;

fn main() -> graphmvp::Result<()> {
    let ln2 = std::f64::consts::LN_2;

    // All-zero scores, K = 2: the softmax loss sits at ln 2, the
    // binary-cross-entropy loss at 2 ln 2.
    let mut tape = Tape::new();
    let zeros = tape.leaf(Tensor::zeros(&[2, 3]));
    let batch = BatchReprs {
        hx: zeros,
        hy: zeros,
    };
    let i = infonce(&mut tape, &batch)?;
    let e = ebm_nce_with(&mut tape, &batch, &[1, 0], &[1, 0])?;
    println!(
        "infonce(zero scores, K=2) = {:.9}   (ln 2 = {ln2:.9})",
        tape.value(i).item()
    );
    println!(
        "ebm_nce(zero scores)      = {:.9}   (2 ln 2 = {:.9})",
        tape.value(e).item(),
        2.0 * ln2
    );

    // KL of unit-variance shifted Gaussian against the standard normal.
    let mut tape = Tape::new();
    let mu = tape.leaf(Tensor::vector(vec![1.0]));
    let sigma = tape.leaf(Tensor::vector(vec![1.0]));
    let kl = kl_diag_gaussian(&mut tape, mu, sigma)?;
    println!(
        "KL(N(1,1) || N(0,1))      = {:.12}  (exact 0.5)",
        tape.value(kl).item()
    );

    // VRR vs RR on random representations: RR is VRR with the noise pinned
    // to zero and no KL term.
    let mut rng = Rng::from_seed(2);
    let cfg = HeadConfig {
        repr_dim: 8,
        latent_dim: 4,
    };
    let mut store = ParamStore::new();
    init_heads(&mut store, "heads", &cfg, &mut rng)?;
    let hx = Tensor::uniform(&[4, 8], 1.0, &mut rng);
    let hy = Tensor::uniform(&[4, 8], 1.0, &mut rng);

    let mut tape = Tape::new();
    let batch = BatchReprs {
        hx: tape.leaf(hx.clone()),
        hy: tape.leaf(hy.clone()),
    };
    let v = vrr(&mut tape, &store, "heads", &batch, 1.0, &mut rng)?;
    let r = rr(&mut tape, &store, "heads", &batch)?;
    println!(
        "vrr(beta=1) = {:.6}, rr = {:.6}",
        tape.value(v).item(),
        tape.value(r).item()
    );

    // The estimator never exceeds ln K; on independent inputs it hovers at
    // zero.
    let k = 64;
    let mut acc = 0.0;
    for _ in 0..50 {
        let a = Tensor::new(vec![k, 8], (0..k * 8).map(|_| rng.normal() * 0.2).collect())?;
        let b = Tensor::new(vec![k, 8], (0..k * 8).map(|_| rng.normal() * 0.2).collect())?;
        acc += mi_estimate_infonce(&a, &b)?;
    }
    println!(
        "mi estimate on independent pairs: {:.4} nats (bound ln {k} = {:.4})",
        acc / 50.0,
        (k as f64).ln()
    );
    Ok(())
}
