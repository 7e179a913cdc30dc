//! Central-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tape::{Tape, VarId};

/// Anything that builds a scalar loss on a fresh tape from the current
/// parameters. The closure must be deterministic given the store: callers
/// pin any Rng state by cloning a fixed generator inside the closure.
pub type LossFn<'a> = &'a dyn Fn(&ParamStore) -> Result<(Tape, VarId)>;

/// Max over all parameter entries of
/// `|analytic - numeric| / max(1, |analytic|, |numeric|)`
/// with central differences of step `eps`.
pub fn grad_check(params: &ParamStore, eps: f64, f: LossFn) -> Result<f64> {
    let (tape, loss) = f(params)?;
    let grads = tape.backward(loss, params)?;

    let eval = |store: &ParamStore| -> Result<f64> {
        let (tape, loss) = f(store)?;
        let v = tape.value(loss).item();
        if !v.is_finite() {
            return Err(Error::NonFinite(
                "loss non-finite at perturbed point".into(),
            ));
        }
        Ok(v)
    };

    let mut max_rel: f64 = 0.0;
    let mut work = params.clone();
    let names: Vec<String> = params.names().cloned().collect();
    for name in &names {
        let numel = params.get(name).unwrap().numel();
        for i in 0..numel {
            let orig = params.get(name).unwrap().data()[i];
            work.get_mut(name).unwrap().data_mut()[i] = orig + eps;
            let plus = eval(&work)?;
            work.get_mut(name).unwrap().data_mut()[i] = orig - eps;
            let minus = eval(&work)?;
            work.get_mut(name).unwrap().data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.get(name).unwrap().data()[i];
            let rel = (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs());
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
