mod common;

use common::{oracle, suites};
use icicle::metrics::{ari, clustering_accuracy, confusion_matrix, nmi, Partition};
use proptest::prelude::*;

#[test]
fn exhaustive_agreement() {
    for (name, err) in suites::metric_checks() {
        assert!(err < 1e-9, "{name}: {err}");
    }
}

fn labelings() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..9).prop_flat_map(|n| {
        (prop::collection::vec(0usize..5, n), prop::collection::vec(0usize..5, n))
    })
}

fn relabel(labels: &[usize], shift: usize) -> Vec<usize> {
    labels.iter().map(|&l| (l + shift) % 5).collect()
}

proptest! {
    #[test]
    fn accuracy_is_permutation_invariant((t, p) in labelings(), s in 1usize..5) {
        let base = clustering_accuracy(&Partition::new(t.clone(), 5).unwrap(), &Partition::new(p.clone(), 5).unwrap()).unwrap();
        let moved = clustering_accuracy(
            &Partition::new(relabel(&t, s), 5).unwrap(),
            &Partition::new(relabel(&p, s + 1), 5).unwrap(),
        ).unwrap();
        prop_assert!((base - moved).abs() < 1e-12);
        prop_assert!((base - oracle::accuracy(&t, &p)).abs() < 1e-12);
    }

    #[test]
    fn nmi_and_ari_are_symmetric((t, p) in labelings()) {
        let (t, p) = (Partition::from_labels(t), Partition::from_labels(p));
        prop_assert!((nmi(&t, &p).unwrap() - nmi(&p, &t).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&t, &p).unwrap() - ari(&p, &t).unwrap()).abs() < 1e-12);
        let a = ari(&t, &p).unwrap();
        prop_assert!(a <= 1.0 + 1e-12);
        prop_assert!((0.0..=1.0).contains(&nmi(&t, &p).unwrap()));
    }

    #[test]
    fn ari_is_one_only_for_equivalent_partitions((t, p) in labelings()) {
        let acc = clustering_accuracy(&Partition::from_labels(t.clone()), &Partition::from_labels(p.clone())).unwrap();
        let a = ari(&Partition::from_labels(t.clone()), &Partition::from_labels(p.clone())).unwrap();
        let equivalent = acc == 1.0 && {
            let kt = t.iter().collect::<std::collections::BTreeSet<_>>().len();
            let kp = p.iter().collect::<std::collections::BTreeSet<_>>().len();
            kt == kp
        };
        prop_assert_eq!((a - 1.0).abs() < 1e-12, equivalent);
    }

    #[test]
    fn confusion_totals((t, p) in labelings()) {
        let cm = confusion_matrix(&Partition::new(t.clone(), 5).unwrap(), &Partition::new(p, 5).unwrap()).unwrap();
        prop_assert_eq!(cm.total(), t.len() as u64);
    }
}

#[test]
fn length_mismatch_is_a_contract_error() {
    let a = Partition::from_labels(vec![0, 1]);
    let b = Partition::from_labels(vec![0]);
    assert!(matches!(nmi(&a, &b), Err(icicle::Error::Contract(_))));
    assert!(matches!(ari(&a, &b), Err(icicle::Error::Contract(_))));
    assert!(matches!(confusion_matrix(&a, &b), Err(icicle::Error::Contract(_))));
}
