use crate::error::{Error, Result};

/// Numerically stable softmax over the unmasked entries of `scores`.
///
/// `mask[j] == true` marks entry `j` as present. Masked entries receive a
/// weight of exactly zero; the maximum is taken over unmasked entries only.
pub fn softmax_stable(scores: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>> {
    if let Some(mask) = mask {
        if mask.len() != scores.len() {
            return Err(Error::shape("softmax_stable", format!("mask of length {}", scores.len()), mask.len()));
        }
    }
    let present = |j: usize| mask.map_or(true, |m| m[j]);

    let max = (0..scores.len())
        .filter(|&j| present(j))
        .map(|j| scores[j])
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "softmax over an empty or fully masked score vector".into(),
        ));
    }
    if !max.is_finite() {
        return Err(Error::NonFinite(format!("softmax score {max}")));
    }

    let mut out: Vec<f64> = (0..scores.len())
        .map(|j| if present(j) { (scores[j] - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|w| *w /= total);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_pair() {
        assert_eq!(softmax_stable(&[0.0, 0.0], None).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn ln2_gives_two_thirds() {
        let w = softmax_stable(&[2f64.ln(), 0.0], None).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn large_gap_does_not_overflow() {
        // exp(-1000) underflows to zero in f64; the exact value is ~5e-435.
        let w = softmax_stable(&[1000.0, 0.0], None).unwrap();
        assert_eq!(w[0], 1.0);
        assert!(w[1] >= 0.0 && w[1] < 1e-300);
    }

    #[test]
    fn masked_entries_are_zero() {
        let w = softmax_stable(&[5.0, 1.0, 1.0], Some(&[false, true, true])).unwrap();
        assert_eq!(w[0], 0.0);
        assert!((w[1] - 0.5).abs() < 1e-15);
        assert!(softmax_stable(&[1.0, 2.0], Some(&[false, false])).is_err());
        assert!(softmax_stable(&[], None).is_err());
        assert!(softmax_stable(&[1.0], Some(&[true, true])).is_err());
    }

    proptest! {
        #[test]
        fn normalized_and_shift_invariant(
            scores in prop::collection::vec(-20.0f64..20.0, 1..12),
            shift in -100.0f64..100.0,
        ) {
            let w = softmax_stable(&scores, None).unwrap();
            let total: f64 = w.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let w2 = softmax_stable(&shifted, None).unwrap();
            for (a, b) in w.iter().zip(&w2) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
