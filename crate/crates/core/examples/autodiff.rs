//! Builds a small expression on the tape, reads gradients back and checks
//! them against central differences.

use icicle::tensor::{grad_check, Tape, Tensor};

fn main() -> icicle::Result<()> {
    let x = Tensor::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]])?;
    let w = Tensor::from_rows(&[[0.2, -0.4], [0.1, 0.3], [-0.5, 0.6]])?;

    // f(x) = sum(log_softmax(relu(x W)))
    let tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let wv = tape.constant(w.clone());
    let out = xv.matmul(wv)?.relu()?.log_row_softmax()?.sum()?;
    let grads = tape.backward(out)?;
    println!("f = {:.6}", out.value().item());
    println!("df/dx = {:?}", grads.wrt(xv).data());

    let err = grad_check(
        |v| v.matmul(v.tape().constant(w.clone()))?.relu()?.log_row_softmax()?.sum(),
        &x,
        1e-6,
    )?;
    println!("max relative error against central differences: {err:.2e}");

    let err = grad_check(|v| v.l2_normalize_rows()?.pairwise_sq_dist(v)?.exp()?.mean(), &x, 1e-6)?;
    println!("normalized pairwise kernel: {err:.2e}");
    Ok(())
}
