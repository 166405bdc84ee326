//! Shared helpers for the integration tests: random instances, brute-force
//! reference implementations and the measurement suites behind the
//! acceptance gate.
#![allow(dead_code)]

pub mod oracle;
pub mod suites;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use icicle::tensor::Tensor;

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rows(rng: &mut impl Rng, r: usize, c: usize, lo: f64, hi: f64) -> Rows {
    (0..r)
        .map(|_| (0..c).map(|_| rng.random_range(lo..hi)).collect())
        .collect()
}

/// Strictly positive rows summing to one.
pub fn stochastic(rng: &mut impl Rng, r: usize, c: usize) -> Rows {
    rows(rng, r, c, 0.05, 1.0)
        .into_iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn tensor(rows: &Rows) -> Tensor {
    Tensor::from_rows(rows).unwrap()
}

pub fn to_rows(t: &Tensor) -> Rows {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..len).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}
