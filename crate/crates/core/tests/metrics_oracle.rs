use noisebench::metrics::{confusion, format_percent, macro_f1, Averaging, ConfusionMatrix};
use noisebench::rng::SeededRng;
use proptest::prelude::*;

mod common;
use common::brute_force_f1;

#[test]
fn agrees_with_brute_force_oracle() {
    let mut rng = SeededRng::new(17);
    for _ in 0..200 {
        let k = 2 + rng.below(5);
        let n = 1 + rng.below(60);
        let y_true: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let y_pred: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let report = macro_f1(&confusion(&y_true, &y_pred, k).unwrap()).unwrap();
        let (expected, per_class) = brute_force_f1(&y_true, &y_pred, k);
        assert!((report.macro_f1 - expected).abs() < 1e-12);
        for (a, b) in report.per_class_f1.iter().zip(&per_class) {
            assert!((a - b).abs() < 1e-12);
            assert!((0.0..=1.0).contains(a));
        }
    }
}

#[test]
fn worked_two_class_matrix() {
    let cm = ConfusionMatrix::from_counts(vec![vec![8, 2], vec![3, 7]]).unwrap();
    let r = macro_f1(&cm).unwrap();
    // class 0: P = 8/11, R = 8/10; class 1: P = 7/9, R = 7/10
    let f0 = 2.0 * (8.0 / 11.0) * 0.8 / (8.0 / 11.0 + 0.8);
    let f1 = 2.0 * (7.0 / 9.0) * 0.7 / (7.0 / 9.0 + 0.7);
    assert!((r.macro_f1 - (f0 + f1) / 2.0).abs() < 1e-12);
    assert!((r.macro_f1 - 0.7494).abs() < 5e-5);
    assert_eq!(format_percent(r.macro_f1), "74.94");
}

#[test]
fn tally_matches_pairs() {
    let mut rng = SeededRng::new(5);
    let y_true: Vec<usize> = (0..1000).map(|_| rng.below(4)).collect();
    let y_pred: Vec<usize> = (0..1000).map(|_| rng.below(4)).collect();
    let cm = confusion(&y_true, &y_pred, 4).unwrap();
    assert_eq!(cm.total(), 1000);
    for t in 0..4 {
        for p in 0..4 {
            let n = y_true.iter().zip(&y_pred).filter(|(a, b)| **a == t && **b == p).count() as u64;
            assert_eq!(cm.get(t, p), n);
        }
    }
}

#[test]
fn unsupported_class_is_excluded() {
    // class 2 never occurs and is never predicted
    let r = macro_f1(&confusion(&[0, 1, 1, 0], &[0, 1, 0, 0], 3).unwrap()).unwrap();
    let (expected, _) = brute_force_f1(&[0, 1, 1, 0], &[0, 1, 0, 0], 3);
    assert!((r.macro_f1 - expected).abs() < 1e-12);
    assert!((r.macro_f1 - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
}

#[test]
fn perfect_and_weighted() {
    let y = [0, 1, 2, 2, 1];
    let r = macro_f1(&confusion(&y, &y, 3).unwrap()).unwrap();
    assert_eq!(r.score(Averaging::Macro), 1.0);
    assert_eq!(r.score(Averaging::Weighted), 1.0);
    assert!(confusion(&[0, 3], &[0, 1], 3).is_err());
}

proptest! {
    #[test]
    fn permutation_invariance(
        pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..80),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let base = macro_f1(&confusion(&t, &p, 4).unwrap()).unwrap().macro_f1;
        let tp: Vec<usize> = t.iter().map(|&c| perm[c]).collect();
        let pp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
        let permuted = macro_f1(&confusion(&tp, &pp, 4).unwrap()).unwrap().macro_f1;
        prop_assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn macro_is_one_iff_diagonal(pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..40)) {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let r = macro_f1(&confusion(&t, &p, 3).unwrap()).unwrap();
        prop_assert_eq!(r.macro_f1 == 1.0, t == p);
    }
}
