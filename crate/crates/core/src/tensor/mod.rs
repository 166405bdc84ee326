//! Dense `f64` tensors and the reverse-mode tape that differentiates them.

mod array;
mod gemm;
mod gradcheck;
mod tape;

pub use array::Tensor;
pub use gradcheck::grad_check;
pub use tape::{Gradients, Tape, Var, NORM_EPS};
