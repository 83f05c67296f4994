use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Mode {
    /// Per-class F1 weighted by support in the truth labels.
    Weighted,
    /// Unweighted mean over every class seen in either sequence.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassF1 {
    pub label: String,
    pub f1: f64,
    pub support: usize,
}

/// Per-class F1 over the union of predicted and true labels, sorted by label.
pub fn per_class_f1<T: AsRef<str>>(predicted: &[T], truth: &[T]) -> Result<Vec<ClassF1>> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "prediction and truth lengths differ ({} vs {})",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("F1 of an empty labeling"));
    }
    let labels: BTreeSet<&str> = predicted.iter().chain(truth).map(AsRef::as_ref).collect();
    // (tp, fp, fn)
    let mut tallies: BTreeMap<&str, (usize, usize, usize)> = labels.iter().map(|&l| (l, (0, 0, 0))).collect();
    for (p, t) in predicted.iter().zip(truth) {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p == t {
            tallies.get_mut(p).unwrap().0 += 1;
        } else {
            tallies.get_mut(p).unwrap().1 += 1;
            tallies.get_mut(t).unwrap().2 += 1;
        }
    }
    Ok(tallies
        .into_iter()
        .map(|(label, (tp, fp, fn_))| {
            let denom = 2 * tp + fp + fn_;
            ClassF1 {
                label: label.to_string(),
                f1: if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 },
                support: tp + fn_,
            }
        })
        .collect())
}

pub fn f1_score<T: AsRef<str>>(predicted: &[T], truth: &[T], mode: F1Mode) -> Result<f64> {
    let classes = per_class_f1(predicted, truth)?;
    Ok(match mode {
        F1Mode::Weighted => {
            let total = truth.len() as f64;
            classes.iter().map(|c| c.f1 * c.support as f64 / total).sum()
        }
        F1Mode::Macro => classes.iter().map(|c| c.f1).sum::<f64>() / classes.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_scores_one() {
        let t = ["a", "b", "b", "c"];
        assert_eq!(f1_score(&t, &t, F1Mode::Weighted).unwrap(), 1.0);
        assert_eq!(f1_score(&t, &t, F1Mode::Macro).unwrap(), 1.0);
        assert_eq!(f1_score(&["x"; 4], &["x"; 4], F1Mode::Macro).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_weighted() {
        let w = f1_score(&["A", "A", "A"], &["A", "A", "B"], F1Mode::Weighted).unwrap();
        assert!((w - 2.0 / 3.0 * 0.8).abs() < 1e-12);
        let m = f1_score(&["A", "A", "A"], &["A", "A", "B"], F1Mode::Macro).unwrap();
        assert!((m - 0.4).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(f1_score::<&str>(&[], &[], F1Mode::Macro).is_err());
        assert!(f1_score(&["a"], &["a", "b"], F1Mode::Macro).is_err());
    }
}
