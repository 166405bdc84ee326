use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAX_ITERATIONS: usize = 100;
pub const SHIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centers: Tensor,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and distance of the closest center; ties to the lower index.
fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Point farthest from its nearest center; ties to the lower index.
fn farthest(points: &Tensor, centers: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..points.rows() {
        let d = nearest(points.row(i), centers).1;
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Lloyd's algorithm over the rows of `points`. The first seed is drawn from
/// `seed`; each further seed is the point farthest from those chosen so far.
pub fn kmeans_init_centers(points: &Tensor, k: usize, seed: u64) -> Result<KMeans> {
    let n = points.rows();
    if k == 0 || n < k {
        return Err(Error::Config(format!("k-means needs 1 <= K <= N, got K = {k}, N = {n}")));
    }
    if !points.all_finite() {
        return Err(Error::NonFinite { op: "kmeans" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points.row(rng.random_range(0..n)).to_vec()];
    while centers.len() < k {
        centers.push(points.row(farthest(points, &centers)).to_vec());
    }

    let d = points.cols();
    let mut labels = vec![0; n];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (i, label) in labels.iter_mut().enumerate() {
            *label = nearest(points.row(i), &centers).0;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| s.into_iter().map(|v| v / c.max(1) as f64).collect())
            .collect();
        for j in 0..k {
            if counts[j] == 0 {
                let others: Vec<Vec<f64>> = (0..k).filter(|&o| o != j).map(|o| next[o].clone()).collect();
                next[j] = points.row(farthest(points, &others)).to_vec();
            }
        }
        let shift = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        if shift < SHIFT_TOL {
            break;
        }
    }
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let (j, dist) = nearest(points.row(i), &centers);
        *label = j;
        inertia += dist;
    }
    Ok(KMeans {
        centers: Tensor::matrix(k, d, centers.concat())?,
        labels,
        inertia,
        iterations,
    })
}
