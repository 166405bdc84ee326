//! Textbook evaluations written directly from the definitions, with plain
//! loops and no shared code with the library.

use super::Rows;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn transpose(m: &Rows) -> Rows {
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    dot(u, v) / (dot(u, u).sqrt() * dot(v, v).sqrt())
}

/// Per-anchor loss `−ln(e^{s(a_i,b_i)/τ} / Σ_j (e^{s(a_i,a_j)/τ} + e^{s(a_i,b_j)/τ}))`
/// averaged over both views.
pub fn instance_loss(a: &Rows, b: &Rows, tau: f64) -> f64 {
    let n = a.len();
    let one_side = |x: &Rows, y: &Rows, i: usize| {
        let pos = (cosine(&x[i], &y[i]) / tau).exp();
        let mut denom = 0.0;
        for j in 0..n {
            denom += (cosine(&x[i], &x[j]) / tau).exp();
            denom += (cosine(&x[i], &y[j]) / tau).exp();
        }
        -(pos / denom).ln()
    };
    let mut total = 0.0;
    for i in 0..n {
        total += one_side(a, b, i) + one_side(b, a, i);
    }
    total / (2.0 * n as f64)
}

pub fn column_entropy(w: &Rows) -> f64 {
    let n = w.len() as f64;
    let mut h = 0.0;
    for j in 0..w[0].len() {
        let p: f64 = w.iter().map(|r| r[j]).sum::<f64>() / n;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

pub fn cluster_loss(wa: &Rows, wb: &Rows, tau: f64) -> f64 {
    instance_loss(&transpose(wa), &transpose(wb), tau) - column_entropy(wa) - column_entropy(wb)
}

fn frob(a: &Rows, b: &Rows) -> f64 {
    a.iter().zip(b).map(|(x, y)| sq_dist(x, y)).sum()
}

pub fn two_view_reconstruction(za: &Rows, zb: &Rows, ra: &Rows, rb: &Rows) -> f64 {
    (frob(za, ra) + frob(zb, rb)) / (2.0 * za.len() as f64)
}

pub fn single_view_reconstruction(z: &Rows, r: &Rows) -> f64 {
    frob(z, r) / z.len() as f64
}

pub fn heat_kernel(a: &[f64], b: &[f64], t: f64) -> f64 {
    (-sq_dist(a, b) / t).exp()
}

pub fn student_t(h: &Rows, mu: &Rows, t: f64) -> Rows {
    h.iter()
        .map(|hi| {
            let k: Vec<f64> = mu
                .iter()
                .map(|m| (1.0 + sq_dist(hi, m) / t).powf(-(t + 1.0) / 2.0))
                .collect();
            let s: f64 = k.iter().sum();
            k.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn target(q: &Rows) -> Rows {
    let k = q[0].len();
    let f: Vec<f64> = (0..k).map(|j| q.iter().map(|r| r[j]).sum()).collect();
    q.iter()
        .map(|r| {
            let w: Vec<f64> = (0..k).map(|j| r[j] * r[j] / f[j]).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn kl(p: &Rows, r: &Rows) -> f64 {
    let mut total = 0.0;
    for (pr, rr) in p.iter().zip(r) {
        for (&pv, &rv) in pr.iter().zip(rr) {
            if pv > 0.0 {
                total += pv * (pv / rv).ln();
            }
        }
    }
    total
}

/// Directed k-NN lists by descending heat-kernel similarity, ties to the
/// lower index, over every candidate.
pub fn knn(points: &Rows, k: usize, t: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&x, &y| {
                let sx = heat_kernel(&points[i], &points[x], t);
                let sy = heat_kernel(&points[i], &points[y], t);
                sy.partial_cmp(&sx).unwrap().then(x.cmp(&y))
            });
            order.truncate(k);
            order
        })
        .collect()
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` by the entrywise formula.
pub fn normalized_adjacency(adj: &[Vec<bool>]) -> Rows {
    let n = adj.len();
    let tilde = |i: usize, j: usize| if i == j || adj[i][j] { 1.0 } else { 0.0 };
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| tilde(i, j)).sum()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| tilde(i, j) / (deg[i] * deg[j]).sqrt()).collect())
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best accuracy over every mapping of predicted clusters onto classes.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    let size = truth.iter().chain(pred).max().map_or(0, |m| m + 1);
    let best = permutations(size)
        .into_iter()
        .map(|perm| truth.iter().zip(pred).filter(|(&t, &p)| perm[p] == t).count())
        .max()
        .unwrap_or(0);
    best as f64 / truth.len() as f64
}

/// Pair-counting ARI by enumerating all pairs.
pub fn ari(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len();
    let (mut both, mut same_t, mut same_p, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let t = truth[i] == truth[j];
            let p = pred[i] == pred[j];
            pairs += 1.0;
            same_t += f64::from(u8::from(t));
            same_p += f64::from(u8::from(p));
            both += f64::from(u8::from(t && p));
        }
    }
    let expected = same_t * same_p / pairs;
    let max = (same_t + same_p) / 2.0;
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// Geometric-mean NMI from an explicit contingency table.
pub fn nmi(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len() as f64;
    let kt = truth.iter().max().unwrap() + 1;
    let kp = pred.iter().max().unwrap() + 1;
    let mut table = vec![vec![0.0; kp]; kt];
    for (&t, &p) in truth.iter().zip(pred) {
        table[t][p] += 1.0;
    }
    let rt: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cp: Vec<f64> = (0..kp).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h = |c: &[f64]| -> f64 {
        c.iter().filter(|&&v| v > 0.0).map(|&v| -(v / n) * (v / n).ln()).sum()
    };
    let mut mi = 0.0;
    for i in 0..kt {
        for j in 0..kp {
            let c = table[i][j];
            if c > 0.0 {
                mi += (c / n) * ((c / n) / ((rt[i] / n) * (cp[j] / n))).ln();
            }
        }
    }
    let (ht, hp) = (h(&rt), h(&cp));
    if ht == 0.0 && hp == 0.0 {
        return 1.0;
    }
    if ht == 0.0 || hp == 0.0 {
        return 0.0;
    }
    mi / (ht * hp).sqrt()
}
