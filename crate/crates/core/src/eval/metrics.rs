use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entry `(i, j)` counts rows of true class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_indices(truth: &[usize], predicted: &[usize], classes: &[String]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let k = classes.len();
        let mut counts = vec![vec![0u64; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= k || p >= k {
                return Err(Error::UnknownLabel(format!("class index {}", t.max(p))));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix {
            classes: classes.to_vec(),
            counts,
        })
    }

    pub fn from_labels(truth: &[String], predicted: &[String], classes: &[String]) -> Result<Self> {
        let index = |l: &String| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::UnknownLabel(l.clone()))
        };
        let t = truth.iter().map(index).collect::<Result<Vec<_>>>()?;
        let p = predicted.iter().map(index).collect::<Result<Vec<_>>>()?;
        Self::from_indices(&t, &p, classes)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted_count(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn index_of(&self, class: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::UnknownLabel(class.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Headline metrics, all in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub fpr: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Cells whose denominator was zero (reported as 0) and excluded classes.
    pub warnings: Vec<String>,
}

fn ratio(num: u64, den: u64, what: &str, warnings: &mut Vec<String>) -> f64 {
    if den == 0 {
        warnings.push(format!("{what}: zero denominator, reported as 0"));
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn class_metrics(cm: &ConfusionMatrix, c: usize, warnings: &mut Vec<String>) -> ClassMetrics {
    let tp = cm.counts[c][c];
    let name = &cm.classes[c];
    let precision = ratio(tp, cm.predicted_count(c), &format!("precision[{name}]"), warnings);
    let recall = ratio(tp, cm.support(c), &format!("recall[{name}]"), warnings);
    ClassMetrics {
        class: name.clone(),
        precision,
        recall,
        f1: harmonic(precision, recall),
        support: cm.support(c),
    }
}

/// Share of benign rows predicted as anything else.
pub fn benign_fpr(cm: &ConfusionMatrix, benign: usize, warnings: &mut Vec<String>) -> f64 {
    let support = cm.support(benign);
    ratio(support - cm.counts[benign][benign], support, "fpr", warnings)
}

/// Metrics of the `positive` class of a two-class matrix; the other class
/// is the negative (benign) one.
pub fn binary_metrics(cm: &ConfusionMatrix, positive: usize) -> Result<Metrics> {
    if cm.n_classes() != 2 || positive > 1 {
        return Err(Error::invalid(format!(
            "binary metrics need a 2x2 matrix, got {} classes",
            cm.n_classes()
        )));
    }
    let mut warnings = Vec::new();
    let negative = 1 - positive;
    let pos = class_metrics(cm, positive, &mut warnings);
    let neg = class_metrics(cm, negative, &mut Vec::new());
    let accuracy = ratio(cm.trace(), cm.total(), "accuracy", &mut warnings);
    let fpr = benign_fpr(cm, negative, &mut warnings);
    Ok(Metrics {
        f1: pos.f1,
        accuracy,
        recall: pos.recall,
        precision: pos.precision,
        fpr,
        per_class: if positive == 1 { vec![neg, pos] } else { vec![pos, neg] },
        warnings,
    })
}

/// Unweighted one-vs-rest averages. Classes with no true and no predicted
/// rows are left out of the averages.
pub fn macro_metrics(cm: &ConfusionMatrix, benign: usize) -> Result<Metrics> {
    let k = cm.n_classes();
    if k < 2 || benign >= k {
        return Err(Error::invalid("macro metrics need at least two classes and a valid benign index"));
    }
    let mut warnings = Vec::new();
    let mut per_class = Vec::with_capacity(k);
    let mut used = Vec::with_capacity(k);
    for c in 0..k {
        if cm.support(c) == 0 && cm.predicted_count(c) == 0 {
            warnings.push(format!("class {} has no rows; excluded from macro averages", cm.classes[c]));
            continue;
        }
        let m = class_metrics(cm, c, &mut warnings);
        used.push(per_class.len());
        per_class.push(m);
    }
    let n = used.len().max(1) as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n;
    Ok(Metrics {
        f1: mean(|m| m.f1),
        accuracy: ratio(cm.trace(), cm.total(), "accuracy", &mut warnings),
        recall: mean(|m| m.recall),
        precision: mean(|m| m.precision),
        fpr: benign_fpr(cm, benign, &mut warnings),
        per_class,
        warnings,
    })
}

/// Binary metrics for two classes, macro metrics otherwise.
pub fn task_metrics(cm: &ConfusionMatrix, benign: usize) -> Result<Metrics> {
    if cm.n_classes() == 2 {
        binary_metrics(cm, 1 - benign.min(1))
    } else {
        macro_metrics(cm, benign)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn hand_counted_matrix() {
        let t = [0, 0, 1, 1, 1, 2, 2, 2, 2, 0];
        let p = [0, 1, 1, 1, 2, 2, 2, 0, 2, 0];
        let cm = ConfusionMatrix::from_indices(&t, &p, &classes(3)).unwrap();
        assert_eq!(cm.counts, vec![vec![2, 1, 0], vec![0, 2, 1], vec![1, 0, 3]]);
        assert_eq!(cm.total(), 10);
        assert!(ConfusionMatrix::from_indices(&[0], &[3], &classes(3)).is_err());
        let labels = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(ConfusionMatrix::from_labels(&labels(&["c0"]), &labels(&["zz"]), &classes(2)).is_err());
    }

    #[test]
    fn binary_hand_arithmetic() {
        // TP=3 FP=1 FN=1 TN=5, positive class 1
        let cm = ConfusionMatrix {
            classes: classes(2),
            counts: vec![vec![5, 1], vec![1, 3]],
        };
        let m = binary_metrics(&cm, 1).unwrap();
        assert_eq!(m.precision, 75.0);
        assert_eq!(m.recall, 75.0);
        assert_eq!(m.f1, 75.0);
        assert_eq!(m.accuracy, 80.0);
        assert!((m.fpr - 100.0 / 6.0).abs() < 1e-12);
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn zero_denominators_warn() {
        let cm = ConfusionMatrix {
            classes: classes(2),
            counts: vec![vec![4, 0], vec![0, 0]],
        };
        let m = binary_metrics(&cm, 1).unwrap();
        assert_eq!(m.f1, 0.0);
        assert!(!m.warnings.is_empty());
        assert!(binary_metrics(
            &ConfusionMatrix {
                classes: classes(3),
                counts: vec![vec![0; 3]; 3]
            },
            1
        )
        .is_err());
    }

    #[test]
    fn macro_is_unweighted() {
        // class 0: F1 100 on 100 rows; class 1 / 2 halves of a confused pair
        let cm = ConfusionMatrix {
            classes: classes(4),
            counts: vec![vec![100, 0, 0, 0], vec![0, 1, 1, 0], vec![0, 1, 1, 0], vec![0, 0, 0, 0]],
        };
        let m = macro_metrics(&cm, 0).unwrap();
        assert!((m.f1 - (100.0 + 50.0 + 50.0) / 3.0).abs() < 1e-12);
        assert_eq!(m.per_class.len(), 3);
        assert_eq!(m.warnings.len(), 1);
        assert_eq!(m.fpr, 0.0);
    }
}
