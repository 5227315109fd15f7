use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// One operating point: predicted positive iff `probability >= threshold`.
/// The first point uses an infinite threshold (nothing predicted positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "extended_float")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Sorted by threshold descending, from (0, 0) to (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC over every distinct predicted probability, with tied scores grouped
/// into a single step, and the trapezoidal area under it.
pub fn roc_curve(probabilities: &[f64], truth: &[Label]) -> Result<RocCurve> {
    if probabilities.len() != truth.len() {
        return Err(Error::shape("roc_curve", truth.len(), probabilities.len()));
    }
    if let Some(p) = probabilities.iter().find(|p| !p.is_finite()) {
        return Err(Error::NonFinite(format!("probability {p} in ROC input")));
    }
    let pos = truth.iter().filter(|y| y.is_positive()).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument("ROC needs at least one positive and one negative user".into()));
    }

    let mut order: Vec<usize> = (0..probabilities.len()).collect();
    order.sort_by(|&a, &b| probabilities[b].total_cmp(&probabilities[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = probabilities[order[i]];
        while i < order.len() && probabilities[order[i]] == threshold {
            if truth[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().expect("non-empty");
        let point = RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        };
        auc += (point.fpr - prev.fpr) * (point.tpr + prev.tpr) / 2.0;
        points.push(point);
    }
    Ok(RocCurve { points, auc })
}

/// JSON has no infinity; write non-finite values as strings.
mod extended_float {
    use std::fmt;

    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    struct FloatVisitor;

    impl Visitor<'_> for FloatVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a number or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            v.parse().map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(v: &[bool]) -> Vec<Label> {
        v.iter().map(|&b| if b { Label::Depressed } else { Label::Normal }).collect()
    }

    /// Tie-corrected Mann-Whitney statistic: P(score+ > score-) + P(tie)/2.
    fn mann_whitney(probs: &[f64], truth: &[Label]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, yi) in truth.iter().enumerate() {
            for (j, yj) in truth.iter().enumerate() {
                if yi.is_positive() && !yj.is_positive() {
                    pairs += 1.0;
                    if probs[i] > probs[j] {
                        wins += 1.0;
                    } else if probs[i] == probs[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn enumerated_four_point_case() {
        let r = roc_curve(&[0.9, 0.8, 0.3, 0.2], &labels(&[true, false, true, false])).unwrap();
        assert!((r.auc - 0.75).abs() < 1e-15);
        assert_eq!(r.points.len(), 5);
        assert_eq!(r.points[0].threshold, f64::INFINITY);
        let last = r.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn perfect_ranking_and_all_ties() {
        let y = labels(&[true, true, false, false]);
        assert_eq!(roc_curve(&[0.9, 0.7, 0.3, 0.1], &y).unwrap().auc, 1.0);
        let tied = roc_curve(&[0.4; 4], &y).unwrap();
        assert_eq!(tied.auc, 0.5);
        assert_eq!(tied.points.len(), 2);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc_curve(&[0.1, 0.2], &labels(&[true, true])).is_err());
        assert!(roc_curve(&[0.1], &labels(&[true, false])).is_err());
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
        proptest::collection::vec((0u8..20, any::<bool>()), 2..40)
            .prop_map(|v| {
                // Coarse scores so ties are common.
                let probs = v.iter().map(|(s, _)| f64::from(*s) / 20.0).collect();
                (probs, labels(&v.iter().map(|x| x.1).collect::<Vec<_>>()))
            })
            .prop_filter("both classes", |(_, y)| {
                y.iter().any(|l| l.is_positive()) && y.iter().any(|l| !l.is_positive())
            })
    }

    proptest! {
        #[test]
        fn auc_matches_mann_whitney((probs, truth) in scored()) {
            let r = roc_curve(&probs, &truth).unwrap();
            prop_assert!((r.auc - mann_whitney(&probs, &truth)).abs() < 1e-9);
        }

        #[test]
        fn curve_is_monotone((probs, truth) in scored()) {
            let r = roc_curve(&probs, &truth).unwrap();
            for w in r.points.windows(2) {
                prop_assert!(w[1].threshold < w[0].threshold);
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
            let last = r.points.last().unwrap();
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        }

        #[test]
        fn auc_invariant_under_monotone_transform((probs, truth) in scored()) {
            let a = roc_curve(&probs, &truth).unwrap().auc;
            let squashed: Vec<f64> = probs.iter().map(|p| (3.0 * p - 1.0).exp() / 10.0).collect();
            let b = roc_curve(&squashed, &truth).unwrap().auc;
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
