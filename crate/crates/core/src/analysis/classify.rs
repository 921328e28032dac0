use std::collections::BTreeMap;

use super::{same_len, AnalysisError};

/// Mean per-class recall over the classes present in `y_true`. For two
/// classes this is (sensitivity + specificity) / 2.
pub fn balanced_accuracy<T: Ord>(y_true: &[T], y_pred: &[T]) -> Result<f64, AnalysisError> {
    same_len(y_true.len(), y_pred.len())?;
    let mut per: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = per.entry(t).or_default();
        e.0 += 1;
        e.1 += usize::from(t == p);
    }
    Ok(per.values().map(|&(n, hit)| hit as f64 / n as f64).sum::<f64>() / per.len() as f64)
}

/// Ordinal MAE averaged over the distinct true labels.
pub fn macro_mae(y_true: &[i64], y_pred: &[i64]) -> Result<f64, AnalysisError> {
    same_len(y_true.len(), y_pred.len())?;
    let mut per: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let e = per.entry(t).or_default();
        e.0 += 1;
        e.1 += (p - t).abs() as f64;
    }
    Ok(per.values().map(|&(n, s)| s / n as f64).sum::<f64>() / per.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(balanced_accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[1, 1, 0, 0], &[1, 1, 1, 1]).unwrap(), 0.5);
        // Recalls 1, 0.5 and 0.
        let t = ["a", "b", "b", "c"];
        let p = ["a", "b", "a", "a"];
        assert_eq!(balanced_accuracy(&t, &p).unwrap(), 0.5);
    }

    #[test]
    fn macro_mae_examples() {
        assert_eq!(macro_mae(&[0, 3, 5], &[0, 3, 5]).unwrap(), 0.0);
        assert_eq!(macro_mae(&[0, 1, 2, 2], &[1, 2, 1, 3]).unwrap(), 1.0);
        let mut t = vec![0; 9];
        t.push(5);
        assert_eq!(macro_mae(&t, &[0; 10]).unwrap(), 2.5);
    }

    proptest! {
        #[test]
        fn balanced_accuracy_ignores_label_names(
            pairs in prop::collection::vec((0u8..4, 0u8..4), 1..60),
            shift in 1u8..4,
        ) {
            let t: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let relabel = |x: &u8| (x + shift) % 4;
            let t2: Vec<u8> = t.iter().map(relabel).collect();
            let p2: Vec<u8> = p.iter().map(relabel).collect();
            prop_assert!((balanced_accuracy(&t, &p).unwrap() - balanced_accuracy(&t2, &p2).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn macro_mae_unchanged_by_duplication(pairs in prop::collection::vec((0i64..6, 0i64..6), 1..60)) {
            let t: Vec<i64> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<i64> = pairs.iter().map(|p| p.1).collect();
            let t2: Vec<i64> = t.iter().chain(&t).copied().collect();
            let p2: Vec<i64> = p.iter().chain(&p).copied().collect();
            let (a, b) = (macro_mae(&t, &p).unwrap(), macro_mae(&t2, &p2).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
