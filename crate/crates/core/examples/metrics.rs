//! Scores a predicted partition against ground truth.

use icicle::metrics::{ari, clustering_accuracy, confusion_matrix, nmi, MetricsReport, Partition};

fn main() -> icicle::Result<()> {
    let truth = Partition::new(vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2], 3)?;
    // Cluster ids permuted, two points misplaced.
    let pred = Partition::new(vec![2, 2, 2, 1, 0, 0, 0, 0, 1, 1, 1, 2], 3)?;

    println!("ACC {:.4}", clustering_accuracy(&truth, &pred)?);
    println!("NMI {:.4}", nmi(&truth, &pred)?);
    println!("ARI {:.4}", ari(&truth, &pred)?);
    print!("{}", confusion_matrix(&truth, &pred)?.to_csv());

    let relabeled = Partition::new(truth.labels().iter().map(|&l| (l + 1) % 3).collect(), 3)?;
    print!("relabeled truth:\n{}", MetricsReport::evaluate(&truth, &relabeled)?.to_csv());
    Ok(())
}
