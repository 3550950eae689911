use genisbench::eval::{binary_metrics, macro_metrics, ConfusionMatrix, Metrics};
use proptest::prelude::*;

fn classes(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

fn headline(m: &Metrics) -> [f64; 5] {
    [m.f1, m.accuracy, m.recall, m.precision, m.fpr]
}

/// Truth and prediction vectors over `k` classes.
fn labelled(k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    prop::collection::vec((0..k, 0..k), 1..300).prop_map(|pairs| pairs.into_iter().unzip())
}

fn problem() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>, usize)> {
    (2usize..6).prop_flat_map(|k| (Just(k), labelled(k), 0..k)).prop_map(|(k, (t, p), b)| (k, t, p, b))
}

proptest! {
    #[test]
    fn duplicating_rows_changes_nothing((k, truth, pred, benign) in problem(), copies in 2usize..4) {
        let cm = ConfusionMatrix::from_indices(&truth, &pred, &classes(k)).unwrap();
        let t: Vec<usize> = truth.iter().cycle().take(truth.len() * copies).copied().collect();
        let p: Vec<usize> = pred.iter().cycle().take(pred.len() * copies).copied().collect();
        let big = ConfusionMatrix::from_indices(&t, &p, &classes(k)).unwrap();
        let (a, b) = (macro_metrics(&cm, benign).unwrap(), macro_metrics(&big, benign).unwrap());
        for (x, y) in headline(&a).iter().zip(headline(&b)) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        if k == 2 {
            let (a, b) = (binary_metrics(&cm, 1).unwrap(), binary_metrics(&big, 1).unwrap());
            for (x, y) in headline(&a).iter().zip(headline(&b)) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn class_order_does_not_matter((k, truth, pred, benign) in problem(), rotate in 1usize..5) {
        let relabel = |c: usize| (c + rotate) % k;
        let cm = ConfusionMatrix::from_indices(&truth, &pred, &classes(k)).unwrap();
        let t: Vec<usize> = truth.iter().map(|&c| relabel(c)).collect();
        let p: Vec<usize> = pred.iter().map(|&c| relabel(c)).collect();
        let moved = ConfusionMatrix::from_indices(&t, &p, &classes(k)).unwrap();
        let a = macro_metrics(&cm, benign).unwrap();
        let b = macro_metrics(&moved, relabel(benign)).unwrap();
        for (x, y) in headline(&a).iter().zip(headline(&b)) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn fpr_reads_only_benign_rows((k, truth, pred, benign) in problem(), shift in 1usize..5) {
        let cm = ConfusionMatrix::from_indices(&truth, &pred, &classes(k)).unwrap();
        let scrambled: Vec<usize> = truth
            .iter()
            .zip(&pred)
            .map(|(&t, &p)| if t == benign { p } else { (p + shift) % k })
            .collect();
        let other = ConfusionMatrix::from_indices(&truth, &scrambled, &classes(k)).unwrap();
        prop_assert_eq!(macro_metrics(&cm, benign).unwrap().fpr, macro_metrics(&other, benign).unwrap().fpr);
    }

    #[test]
    fn headline_metrics_are_percentages((k, truth, pred, benign) in problem()) {
        let cm = ConfusionMatrix::from_indices(&truth, &pred, &classes(k)).unwrap();
        prop_assert_eq!(cm.total() as usize, truth.len());
        let m = macro_metrics(&cm, benign).unwrap();
        for v in headline(&m) {
            prop_assert!((0.0..=100.0).contains(&v));
        }
        let perfect = ConfusionMatrix::from_indices(&truth, &truth, &classes(k)).unwrap();
        let m = macro_metrics(&perfect, benign).unwrap();
        prop_assert_eq!(headline(&m), [100.0, 100.0, 100.0, 100.0, 0.0]);
    }
}

#[test]
fn labels_outside_the_class_list_are_rejected() {
    assert!(ConfusionMatrix::from_indices(&[0, 1], &[0, 2], &classes(2)).is_err());
    assert!(ConfusionMatrix::from_indices(&[0, 1], &[0], &classes(2)).is_err());
    let names = classes(2);
    assert!(ConfusionMatrix::from_labels(&["c0".into()], &["c9".into()], &names).is_err());
}
