mod common;

use common::{brute_force_assignment, entropy_nmi, random_labels, rng};
use rand::Rng;
use scenecluster::matrix::Matrix;
use scenecluster::metrics::{clustering_accuracy, hungarian, nmi};

#[test]
fn nmi_matches_entropy_formulation() {
    let mut r = rng(31);
    for case in 0..1000 {
        let n = r.random_range(2..=50);
        let pred = random_labels(&mut r, n, 6);
        let truth = random_labels(&mut r, n, 6);
        let got = nmi(&pred, &truth).unwrap();
        let want = entropy_nmi(&pred, &truth);
        assert!(
            (got - want).abs() < 1e-12,
            "case {case}: nmi {got} vs entropy oracle {want}"
        );
    }
}

#[test]
fn nmi_bounds_and_identity() {
    let mut r = rng(32);
    for _ in 0..200 {
        let n = r.random_range(2..=40);
        let labels = random_labels(&mut r, n, 5);
        let other = random_labels(&mut r, n, 5);
        let v = nmi(&labels, &other).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&v));
        if labels.iter().collect::<std::collections::BTreeSet<_>>().len() > 1 {
            assert!((nmi(&labels, &labels).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn hungarian_matches_exhaustive_search() {
    let mut r = rng(33);
    for case in 0..200 {
        let k = r.random_range(1..=7);
        let mut profit = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                profit[(i, j)] = r.random_range(0.0..20.0);
            }
        }
        let assignment = hungarian(&profit).unwrap();
        let got: f64 = assignment.iter().enumerate().map(|(i, &j)| profit[(i, j)]).sum();
        let want = brute_force_assignment(&profit);
        assert!(
            (got - want).abs() < 1e-9,
            "case {case}: hungarian profit {got} vs brute force {want}"
        );
        let mut sorted = assignment.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..k).collect::<Vec<_>>(), "assignment must be a permutation");
    }
}

#[test]
fn accuracy_is_invariant_under_relabeling() {
    let mut r = rng(34);
    for _ in 0..200 {
        let n = r.random_range(4..=40);
        let pred = random_labels(&mut r, n, 5);
        let truth = random_labels(&mut r, n, 5);
        let base = clustering_accuracy(&pred, &truth).unwrap();

        let k = pred.iter().max().unwrap() + 1;
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            let j = r.random_range(0..=i);
            perm.swap(i, j);
        }
        let relabeled: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
        let shuffled = clustering_accuracy(&relabeled, &truth).unwrap();
        assert!(
            (base - shuffled).abs() < 1e-12,
            "accuracy moved under relabeling: {base} vs {shuffled}"
        );
    }
}

#[test]
fn accuracy_known_values() {
    // Two clusters split evenly across two classes: half right at best.
    let pred = vec![0, 1, 0, 1];
    let truth = vec![0, 0, 1, 1];
    assert!((clustering_accuracy(&pred, &truth).unwrap() - 0.5).abs() < 1e-12);
    assert!(nmi(&pred, &truth).unwrap().abs() < 1e-12);

    let pred = vec![1, 1, 0, 0, 2, 2];
    let truth = vec![0, 0, 1, 1, 2, 2];
    assert!((clustering_accuracy(&pred, &truth).unwrap() - 1.0).abs() < 1e-12);

    // More clusters than classes: the extra cluster stays unmatched.
    let pred = vec![0, 0, 1, 2];
    let truth = vec![0, 0, 1, 1];
    assert!((clustering_accuracy(&pred, &truth).unwrap() - 0.75).abs() < 1e-12);
}
