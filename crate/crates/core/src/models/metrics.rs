use crate::error::{Error, Result};

/// Unweighted mean of per-class F1 over `0..n_classes`. A class whose F1 has a
/// zero denominator (never true, never predicted) scores 0.
pub fn macro_f1_with_classes(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if n_classes == 0 {
        return Err(Error::Empty("macro F1 over zero classes".into()));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Data(format!("label outside 0..{n_classes}")));
        }
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let total: f64 = (0..n_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / n_classes as f64)
}

/// Macro F1 over the classes that occur in either sequence.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let mut present: Vec<usize> = y_true.iter().chain(y_pred).copied().collect();
    present.sort_unstable();
    present.dedup();
    if present.is_empty() {
        return Err(Error::Empty("macro F1 of empty label sequences".into()));
    }
    let remap = |v: usize| present.binary_search(&v).unwrap_or(0);
    let t: Vec<usize> = y_true.iter().map(|&v| remap(v)).collect();
    let p: Vec<usize> = y_pred.iter().map(|&v| remap(v)).collect();
    macro_f1_with_classes(&t, &p, present.len())
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("accuracy of no predictions".into()));
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_confusion_matrix() {
        // F1_0 = 2/3, F1_1 = 4/5
        let f = macro_f1(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
        assert!((f - 11.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn extremes() {
        assert_eq!(macro_f1(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap(), 1.0);
        assert_eq!(macro_f1(&[0, 1, 0, 1], &[1, 0, 1, 0]).unwrap(), 0.0);
        // class 2 declared but absent everywhere contributes 0
        let f = macro_f1_with_classes(&[0, 1], &[0, 1], 3).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert!(macro_f1(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn accuracy_counts_hits() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
    }
}
