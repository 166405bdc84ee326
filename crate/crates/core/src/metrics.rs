//! Clustering metrics: ACC under the best label matching, NMI, ARI and the
//! confusion matrix.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Cluster labels in `[0, num_clusters)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    num_clusters: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, num_clusters: usize) -> Result<Self> {
        if let Some(&l) = labels.iter().find(|&&l| l >= num_clusters) {
            return Err(Error::Validation(format!(
                "label {l} out of range for {num_clusters} clusters"
            )));
        }
        Ok(Self { labels, num_clusters })
    }

    /// Infers `num_clusters` as `max + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let num_clusters = labels.iter().max().map_or(0, |m| m + 1);
        Self { labels, num_clusters }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One label per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.labels.len() * 2);
        for l in &self.labels {
            writeln!(out, "{l}").expect("write to String");
        }
        out
    }

    /// Parses one non-negative integer per non-empty line.
    pub fn parse(text: &str) -> Result<Self> {
        let labels = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Validation(format!("line {}: expected a label, got {l:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_labels(labels))
    }
}

fn check_lengths(truth: &Partition, pred: &Partition) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::Contract(format!(
            "partitions differ in length: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    Ok(())
}

/// `counts[i][j] = |{n : truth_n = i, pred_n = j}|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Header row of predicted labels, then one row per true label.
    pub fn to_csv(&self) -> String {
        let k_pred = self.counts.first().map_or(0, Vec::len);
        let mut out = String::from("truth");
        for j in 0..k_pred {
            write!(out, ",{j}").expect("write to String");
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            write!(out, "{i}").expect("write to String");
            for c in row {
                write!(out, ",{c}").expect("write to String");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion_matrix(truth: &Partition, pred: &Partition) -> Result<ConfusionMatrix> {
    check_lengths(truth, pred)?;
    let mut counts = vec![vec![0u64; pred.num_clusters()]; truth.num_clusters()];
    for (&t, &p) in truth.labels().iter().zip(pred.labels()) {
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Minimum-cost perfect matching on a square matrix; `result[row] = col`.
fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // Potentials and matching are 1-based with a virtual column 0.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = i64::MAX;
            let mut next = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let reduced = cost[r - 1][c - 1] - u[r] - v[c];
                if reduced < minv[c] {
                    minv[c] = reduced;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    next = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for c in 1..=n {
        if owner[c] > 0 {
            assignment[owner[c] - 1] = c - 1;
        }
    }
    assignment
}

/// Best-matching accuracy. Unequal cluster counts are handled by padding the
/// confusion matrix to square with zeros.
pub fn clustering_accuracy(truth: &Partition, pred: &Partition) -> Result<f64> {
    check_lengths(truth, pred)?;
    if truth.is_empty() {
        return Err(Error::Contract("accuracy of an empty partition".into()));
    }
    let cm = confusion_matrix(truth, pred)?;
    let size = truth.num_clusters().max(pred.num_clusters());
    let mut cost = vec![vec![0i64; size]; size];
    for (i, row) in cm.counts().iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            cost[j][i] = -(c as i64);
        }
    }
    let matched: i64 = hungarian(&cost)
        .iter()
        .enumerate()
        .map(|(r, &c)| -cost[r][c])
        .sum();
    Ok(matched as f64 / truth.len() as f64)
}

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information over the geometric mean of the two entropies.
pub fn nmi(truth: &Partition, pred: &Partition) -> Result<f64> {
    let cm = confusion_matrix(truth, pred)?;
    let n = truth.len() as f64;
    if truth.is_empty() {
        return Ok(1.0);
    }
    let rows: Vec<u64> = cm.counts().iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..pred.num_clusters())
        .map(|j| cm.counts().iter().map(|r| r[j]).sum())
        .collect();
    let (h_t, h_p) = (entropy(rows.iter().copied(), n), entropy(cols.iter().copied(), n));
    if h_t == 0.0 && h_p == 0.0 {
        return Ok(1.0);
    }
    if h_t == 0.0 || h_p == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in cm.counts().iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (h_t * h_p).sqrt()).clamp(0.0, 1.0))
}

fn pairs(c: u64) -> f64 {
    (c * c.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index from pair counts; 1 when the index is undefined
/// (fewer than two distinct pair structures to compare).
pub fn ari(truth: &Partition, pred: &Partition) -> Result<f64> {
    let cm = confusion_matrix(truth, pred)?;
    let n = truth.len() as u64;
    let index: f64 = cm.counts().iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = cm.counts().iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..pred.num_clusters())
        .map(|j| pairs(cm.counts().iter().map(|r| r[j]).sum()))
        .sum();
    let total = pairs(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// `acc`, `nmi`, `ari` of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

impl MetricsReport {
    pub fn evaluate(truth: &Partition, pred: &Partition) -> Result<Self> {
        Ok(Self {
            acc: clustering_accuracy(truth, pred)?,
            nmi: nmi(truth, pred)?,
            ari: ari(truth, pred)?,
        })
    }

    /// `acc,nmi,ari` header and one data row.
    pub fn to_csv(&self) -> String {
        format!("acc,nmi,ari\n{:.6},{:.6},{:.6}\n", self.acc, self.nmi, self.ari)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(labels: &[usize]) -> Partition {
        Partition::from_labels(labels.to_vec())
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(clustering_accuracy(&p(&[0, 0, 1, 1]), &p(&[1, 1, 0, 0])).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&p(&[0, 0, 1, 1]), &p(&[0, 1, 0, 1])).unwrap(), 0.5);
        assert_eq!(clustering_accuracy(&p(&[0, 1, 2, 2]), &p(&[0, 0, 0, 0])).unwrap(), 0.5);
        assert!(matches!(
            clustering_accuracy(&p(&[0, 1]), &p(&[0])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = hungarian(&cost);
        let total: i64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn nmi_cases() {
        let t = p(&[0, 0, 1, 1]);
        assert!((nmi(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!(nmi(&t, &p(&[0, 1, 0, 1])).unwrap().abs() < 1e-12);
        assert_eq!(nmi(&p(&[0, 0]), &p(&[0, 0])).unwrap(), 1.0);
        assert_eq!(nmi(&t, &p(&[0, 0, 0, 0])).unwrap(), 0.0);
    }

    #[test]
    fn nmi_hand_table() {
        // MI = ln 3 − (2/3) ln 2, H(t) = ln 3, H(p) = ln 3 − (2/3) ln 2
        let v = nmi(&p(&[0, 0, 1, 1, 2, 2]), &p(&[0, 0, 1, 1, 1, 1])).unwrap();
        let (l2, l3) = (2f64.ln(), 3f64.ln());
        let hp = l3 - 2.0 / 3.0 * l2;
        assert!((v - hp / (l3 * hp).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ari_cases() {
        let t = p(&[0, 0, 1, 1]);
        assert!((ari(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!((ari(&t, &p(&[0, 1, 0, 1])).unwrap() + 0.5).abs() < 1e-12);
        assert!((ari(&t, &p(&[1, 1, 0, 0])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confusion_cases() {
        let cm = confusion_matrix(&p(&[0, 0, 1]), &p(&[0, 1, 1])).unwrap();
        assert_eq!(cm.counts(), &[vec![1, 1], vec![0, 1]]);
        assert_eq!(cm.to_csv(), "truth,0,1\n0,1,1\n1,0,1\n");
        let empty = Partition::new(vec![], 2).unwrap();
        let cm = confusion_matrix(&empty, &empty).unwrap();
        assert_eq!(cm.counts(), &[vec![0, 0], vec![0, 0]]);
        let diag = confusion_matrix(&p(&[0, 1, 2]), &p(&[0, 1, 2])).unwrap();
        assert_eq!(diag.total(), 3);
        for (i, row) in diag.counts().iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert_eq!(c, u64::from(i == j));
            }
        }
    }

    #[test]
    fn partition_text_round_trip() {
        let part = p(&[2, 0, 1, 1]);
        assert_eq!(Partition::parse(&part.to_text()).unwrap(), part);
        assert!(Partition::parse("1\nx\n").is_err());
        assert!(Partition::new(vec![3], 3).is_err());
    }
}
