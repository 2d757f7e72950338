use jstdiff::metrics::{evaluate, fidelity};
use proptest::prelude::*;

fn pairs() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
    (1usize..80).prop_flat_map(|n| {
        (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(any::<bool>(), n),
        )
    })
}

#[test]
fn perfect_prediction() {
    let t = [true, false, true, false];
    let m = evaluate(&t, &t).unwrap();
    assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
}

#[test]
fn fidelity_extremes() {
    assert_eq!(fidelity(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
    assert_eq!(fidelity(&[0, 0], &[1, 1]).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn counts_and_f1_identity((truth, pred) in pairs()) {
        let m = evaluate(&truth, &pred).unwrap();
        let t = truth.iter().filter(|&&b| b).count();
        let p = pred.iter().filter(|&&b| b).count();
        let tp = truth.iter().zip(&pred).filter(|(a, b)| **a && **b).count();
        prop_assert_eq!((m.true_diffs, m.predicted_diffs, m.hits), (t, p, tp));
        let pr = if p == 0 { 0.0 } else { tp as f64 / p as f64 };
        let re = if t == 0 { 1.0 } else { tp as f64 / t as f64 };
        prop_assert_eq!((m.precision, m.recall), (pr, re));
        let f1 = if pr + re == 0.0 { 0.0 } else { 2.0 * pr * re / (pr + re) };
        prop_assert_eq!(m.f1, f1);
        prop_assert!((0.0..=1.0).contains(&m.f1));
    }

    #[test]
    fn all_true_prediction_has_precision_equal_to_diff_rate(truth in proptest::collection::vec(any::<bool>(), 1..80)) {
        let m = evaluate(&truth, &vec![true; truth.len()]).unwrap();
        prop_assert_eq!(m.precision, m.diff_rate);
        prop_assert_eq!(m.recall, 1.0);
    }
}
