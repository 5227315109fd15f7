use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Confusion matrix with the depressed class as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Predicted positive iff `probability >= threshold`.
pub fn confusion_counts(probabilities: &[f64], truth: &[Label], threshold: f64) -> Result<ConfusionCounts> {
    if probabilities.len() != truth.len() {
        return Err(Error::shape("confusion_counts", truth.len(), probabilities.len()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in probabilities.iter().zip(truth) {
        match (p >= threshold, y.is_positive()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// A metric whose denominator was zero and was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricWarning {
    PrecisionUndefined,
    RecallUndefined,
    F1Undefined,
}

impl fmt::Display for MetricWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricWarning::PrecisionUndefined => "precision undefined (no predicted positives); reported as 0",
            MetricWarning::RecallUndefined => "recall undefined (no actual positives); reported as 0",
            MetricWarning::F1Undefined => "f1 undefined (precision + recall = 0); reported as 0",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<MetricWarning>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Accuracy, precision, recall and F1 from counts.
pub fn classification_metrics(counts: &ConfusionCounts) -> Result<ClassificationMetrics> {
    let ConfusionCounts { tp, fp, fn_, tn } = *counts;
    let accuracy = ratio(tp + tn, counts.total())
        .ok_or_else(|| Error::InvalidArgument("cannot compute metrics on zero evaluated users".into()))?;
    let mut warnings = Vec::new();
    let precision = ratio(tp, tp + fp).unwrap_or_else(|| {
        warnings.push(MetricWarning::PrecisionUndefined);
        0.0
    });
    let recall = ratio(tp, tp + fn_).unwrap_or_else(|| {
        warnings.push(MetricWarning::RecallUndefined);
        0.0
    });
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        warnings.push(MetricWarning::F1Undefined);
        0.0
    };
    Ok(ClassificationMetrics {
        accuracy,
        precision,
        recall,
        f1,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(v: &[u8]) -> Vec<Label> {
        v.iter().map(|&b| Label::from_u8(b).unwrap()).collect()
    }

    #[test]
    fn hand_counted_case() {
        let c = confusion_counts(&[0.9, 0.4, 0.6, 0.1], &labels(&[1, 1, 0, 0]), 0.5).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 1 });
    }

    #[test]
    fn all_correct_and_all_wrong() {
        let truth = labels(&[1, 0, 1, 0]);
        let c = confusion_counts(&[0.9, 0.1, 0.8, 0.2], &truth, 0.5).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = confusion_counts(&[0.1, 0.9, 0.2, 0.8], &truth, 0.5).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(confusion_counts(&[0.5], &truth, 0.5).is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        let c = confusion_counts(&[0.5], &labels(&[1]), 0.5).unwrap();
        assert_eq!(c.tp, 1);
    }

    #[test]
    fn perfect_and_degenerate_counts() {
        let m = classification_metrics(&ConfusionCounts { tp: 5, fp: 0, fn_: 0, tn: 5 }).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(m.warnings.is_empty());

        let m = classification_metrics(&ConfusionCounts { tp: 0, fp: 0, fn_: 3, tn: 7 }).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!((m.accuracy - 0.7).abs() < 1e-15);
        assert_eq!(m.warnings, vec![MetricWarning::PrecisionUndefined, MetricWarning::F1Undefined]);

        assert!(classification_metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn reconciled_paper_counts() {
        // Exact rationals: 1939/2000, 946/953, 946/1000, 1892/1953.
        let m = classification_metrics(&ConfusionCounts { tp: 946, fp: 7, fn_: 54, tn: 993 }).unwrap();
        assert_eq!(m.accuracy, 1939.0 / 2000.0);
        assert!((m.precision - 946.0 / 953.0).abs() < 1e-15);
        assert_eq!(m.recall, 0.946);
        assert!((m.f1 - 1892.0 / 1953.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn identities_hold(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
            let c = ConfusionCounts { tp, fp, fn_, tn };
            prop_assume!(c.total() > 0);
            let m = classification_metrics(&c).unwrap();
            let n = c.total() as f64;
            prop_assert!((m.accuracy - (tp + tn) as f64 / n).abs() < 1e-12);
            if tp + fp > 0 {
                prop_assert!((m.precision - tp as f64 / (tp + fp) as f64).abs() < 1e-12);
            }
            if tp + fn_ > 0 {
                prop_assert!((m.recall - tp as f64 / (tp + fn_) as f64).abs() < 1e-12);
            }
            if m.precision > 0.0 && m.recall > 0.0 {
                let harmonic = 2.0 / (1.0 / m.precision + 1.0 / m.recall);
                prop_assert!((m.f1 - harmonic).abs() < 1e-12);
            }
            for v in [m.accuracy, m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn accuracy_is_mean_correctness(
            data in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 1..50),
            threshold in 0.01f64..0.99,
        ) {
            let probs: Vec<f64> = data.iter().map(|d| d.0).collect();
            let truth: Vec<Label> = data.iter().map(|d| if d.1 { Label::Depressed } else { Label::Normal }).collect();
            let c = confusion_counts(&probs, &truth, threshold).unwrap();
            prop_assert_eq!(c.total() as usize, data.len());
            let correct = data.iter().filter(|(p, y)| (*p >= threshold) == *y).count();
            let m = classification_metrics(&c).unwrap();
            prop_assert!((m.accuracy - correct as f64 / data.len() as f64).abs() < 1e-12);
        }
    }
}
