//! Confusion matrix and F1 scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "label sequences differ in length: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("confusion matrix needs at least one label"));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        if t >= num_classes || p >= num_classes {
            return Err(Error::invalid(format!(
                "label out of range at position {i}: true {t}, predicted {p}, classes {num_classes}"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub per_class_f1: Vec<f64>,
    pub support: Vec<u64>,
    /// Unweighted mean over classes with non-zero support.
    pub macro_f1: f64,
    /// Support-weighted mean.
    pub weighted_f1: f64,
}

impl F1Report {
    pub fn score(&self, averaging: Averaging) -> f64 {
        match averaging {
            Averaging::Macro => self.macro_f1,
            Averaging::Weighted => self.weighted_f1,
        }
    }
}

/// Per-class precision, recall and F1 with the zero-denominator conventions
/// P = 0 when nothing was predicted, F1 = 0 when P + R = 0. Classes with no
/// true instances are left out of the averages.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<F1Report> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let k = cm.num_classes();
    let mut per_class_f1 = Vec::with_capacity(k);
    let mut support = Vec::with_capacity(k);
    for c in 0..k {
        let tp = cm.get(c, c) as f64;
        let predicted = cm.predicted(c) as f64;
        let actual = cm.support(c);
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class_f1.push(f1);
        support.push(actual);
    }
    let supported: Vec<usize> = (0..k).filter(|&c| support[c] > 0).collect();
    let macro_f1 = supported.iter().map(|&c| per_class_f1[c]).sum::<f64>() / supported.len() as f64;
    let weighted_f1 = supported
        .iter()
        .map(|&c| per_class_f1[c] * support[c] as f64)
        .sum::<f64>()
        / total as f64;
    Ok(F1Report {
        per_class_f1,
        support,
        macro_f1,
        weighted_f1,
    })
}

/// Table-style percentage with two decimals, e.g. `80.76`.
pub fn format_percent(score: f64) -> String {
    format!("{:.2}", score * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_diagonal() {
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                assert_eq!(cm.get(t, p), u64::from(t == p));
            }
        }
        let r = macro_f1(&cm).unwrap();
        assert_eq!(r.per_class_f1, vec![1.0; 3]);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn all_wrong() {
        let cm = confusion(&[0, 0], &[1, 1], 2).unwrap();
        assert_eq!(cm.counts(), &[vec![0, 2], vec![0, 0]]);
        let r = macro_f1(&cm).unwrap();
        // class 1 has no support and is excluded
        assert_eq!(r.macro_f1, 0.0);
    }

    #[test]
    fn errors() {
        assert!(confusion(&[0], &[0, 1], 2).is_err());
        assert!(confusion(&[0], &[2], 2).is_err());
        assert!(confusion(&[], &[], 2).is_err());
        let empty = ConfusionMatrix::from_counts(vec![vec![0, 0], vec![0, 0]]).unwrap();
        assert!(macro_f1(&empty).is_err());
        assert!(ConfusionMatrix::from_counts(vec![vec![0, 0]]).is_err());
    }

    #[test]
    fn unsupported_class_excluded() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 0, 1], vec![0, 0, 0], vec![1, 0, 3]]).unwrap();
        let r = macro_f1(&cm).unwrap();
        assert_eq!(r.support[1], 0);
        assert!((r.macro_f1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn percent_format() {
        assert_eq!(format_percent(0.8076), "80.76");
        assert_eq!(format_percent(1.0), "100.00");
    }
}
