use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Compares the tape gradient of a scalar function against central
/// differences with step `h`.
///
/// Returns `max_i |analytic_i − numeric_i| / max(1, |analytic_i|)`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: for<'t> Fn(Var<'t>) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let leaf = tape.leaf(x.clone());
    let out = f(leaf)?;
    let analytic = tape.backward(out)?.wrt(leaf);

    let eval = |probe: Tensor| -> Result<f64> {
        let tape = Tape::inference();
        let v = f(tape.leaf(probe))?;
        let value = v.value();
        if !value.is_scalar() {
            return Err(Error::Contract("grad_check needs a scalar function".into()));
        }
        Ok(value.item())
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
