use rand::Rng;

use super::matrix::Matrix;

/// Glorot/Xavier uniform initialization: entries drawn from
/// `U(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols)))`, row-major order.
pub fn glorot_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let bound = glorot_bound(rows, cols);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Matrix::new(rows, cols, data).expect("glorot_init requires positive dims")
}

pub fn glorot_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rng::{stream_rng, Stream};

    #[test]
    fn entries_within_bound() {
        let mut rng = stream_rng(3, Stream::HeadInit);
        let m = glorot_init(7, 5, &mut rng);
        let bound = glorot_bound(7, 5);
        assert!(m.as_slice().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = glorot_init(4, 4, &mut stream_rng(11, Stream::HeadInit));
        let b = glorot_init(4, 4, &mut stream_rng(11, Stream::HeadInit));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mean_is_centred() {
        let m = glorot_init(40, 25, &mut stream_rng(5, Stream::HeadInit));
        let n = m.as_slice().len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        // Uniform(-a, a) has standard deviation a / sqrt(3).
        let std_err = glorot_bound(40, 25) / 3f64.sqrt() / n.sqrt();
        assert!(mean.abs() < 3.0 * std_err, "mean {mean}, se {std_err}");
    }
}
