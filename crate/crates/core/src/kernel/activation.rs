/// Logistic function, evaluated on the branch that never exponentiates a
/// positive argument.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn tanh(x: f64) -> f64 {
    // std's tanh saturates cleanly for large |x|.
    x.tanh()
}

pub fn sigmoid_vec(xs: &[f64]) -> Vec<f64> {
    xs.iter().copied().map(sigmoid).collect()
}

pub fn tanh_vec(xs: &[f64]) -> Vec<f64> {
    xs.iter().copied().map(tanh).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(tanh(0.0), 0.0);
    }

    #[test]
    fn saturation_is_finite() {
        let hi = sigmoid(1000.0);
        assert!(hi > 1.0 - 1e-12 && hi <= 1.0);
        let lo = sigmoid(-1000.0);
        assert!(lo >= 0.0 && lo < 1e-12);
        assert_eq!(tanh(1000.0), 1.0);
        assert_eq!(tanh(-1000.0), -1.0);
        assert!(sigmoid_vec(&[1e300, -1e300]).iter().all(|v| v.is_finite()));
    }

    proptest! {
        #[test]
        fn sigmoid_is_symmetric(x in -50.0f64..50.0) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() <= 1e-12);
        }

        // Beyond |x| ~ 19 tanh rounds to +-1 in f64.
        #[test]
        fn ranges_hold(x in -18.0f64..18.0) {
            let s = sigmoid(x);
            prop_assert!(s > 0.0 && s < 1.0);
            let t = tanh(x);
            prop_assert!(t > -1.0 && t < 1.0);
        }
    }
}
