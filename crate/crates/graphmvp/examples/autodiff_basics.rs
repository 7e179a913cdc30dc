//! Tour of the tensor/tape substrate: record a forward pass, run the
//! reverse sweep, and verify the gradients against central differences.
//!
//! ```bash
//! cargo run --release --example autodiff_basics
//! ```

use graphmvp::gradcheck::grad_check;
use graphmvp::params::ParamStore;
use graphmvp::rng::Rng;
use graphmvp::tape::{Tape, VarId};
use graphmvp::tensor::Tensor;

fn main() -> graphmvp::Result<()> {
    // A scalar chain: loss = mean(sigmoid(x W + b)^2).
    let mut rng = Rng::from_seed(7);
    let mut params = ParamStore::new();
    params.init_linear("w", "b", 4, 3, &mut rng)?;
    let x = Tensor::uniform(&[5, 4], 1.0, &mut rng);

    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let w = tape.param(&params, "w")?;
    let b = tape.param(&params, "b")?;
    let h = tape.matmul(xv, w)?;
    let h = tape.add(h, b)?;
    let s = tape.sigmoid(h)?;
    let sq = tape.square(s)?;
    let loss = tape.mean(sq, None)?;
    println!("loss = {:.6}", tape.value(loss).item());

    let grads = tape.backward(loss, &params)?;
    for (name, grad) in grads.iter() {
        let norm: f64 = grad.data().iter().map(|g| g * g).sum::<f64>().sqrt();
        println!("|grad {name}| = {norm:.6}");
    }

    // The same function handed to the finite-difference checker.
    let f = move |params: &ParamStore| -> graphmvp::Result<(Tape, VarId)> {
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let w = tape.param(params, "w")?;
        let b = tape.param(params, "b")?;
        let h = tape.matmul(xv, w)?;
        let h = tape.add(h, b)?;
        let s = tape.sigmoid(h)?;
        let sq = tape.square(s)?;
        let loss = tape.mean(sq, None)?;
        Ok((tape, loss))
    };
    let err = grad_check(&params, 1e-5, &f)?;
    println!("max relative error vs central differences: {err:.3e}");

    // Reductions that power the contrastive losses: logsumexp is
    // shift-invariant and immune to overflow.
    let mut tape = Tape::new();
    let big = tape.leaf(Tensor::vector(vec![1000.0, 1000.0]));
    let lse = tape.logsumexp(big, None)?;
    println!(
        "logsumexp([1000, 1000]) = 1000 + ln 2 = {:.6}",
        tape.value(lse).item()
    );
    Ok(())
}
