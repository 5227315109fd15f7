//! Supervised head: pooling over a user's feature rows followed by a
//! logistic output unit, trained on mean binary cross-entropy.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attention::{attention_backward, attention_forward, AttentionParams, AttentionTrace};
use crate::error::{Error, Result};
use crate::kernel::params::accumulate;
use crate::kernel::{dot, glorot_init, sigmoid, Matrix, ParamBlock, ParamSet};

/// Probabilities are clamped into `[LOG_CLIP, 1 - LOG_CLIP]` before the log.
pub const LOG_CLIP: f64 = 1e-12;

/// How a user's instance features are reduced to one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Attention,
    Mean,
    Max,
}

impl Pooling {
    pub const ALL: [Pooling; 3] = [Pooling::Attention, Pooling::Mean, Pooling::Max];
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Attention => "attention",
            Pooling::Mean => "mean",
            Pooling::Max => "max",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(Pooling::Attention),
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            other => Err(Error::Config(format!("unknown pooling `{other}`"))),
        }
    }
}

/// `z = w · S + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub w: Vec<f64>,
    pub b: f64,
}

impl ClassifierParams {
    pub fn zeros(feature_dim: usize) -> Self {
        Self {
            w: vec![0.0; feature_dim],
            b: 0.0,
        }
    }

    pub fn init<R: Rng + ?Sized>(feature_dim: usize, rng: &mut R) -> Self {
        Self {
            w: glorot_init(1, feature_dim, rng).into_vec(),
            b: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilHead {
    pub pooling: Pooling,
    /// Present exactly when `pooling` is `Attention`.
    pub attention: Option<AttentionParams>,
    pub classifier: ClassifierParams,
}

impl MilHead {
    pub fn zeros(pooling: Pooling, feature_dim: usize, attention_dim: usize) -> Self {
        Self {
            pooling,
            attention: (pooling == Pooling::Attention).then(|| AttentionParams::zeros(feature_dim, attention_dim)),
            classifier: ClassifierParams::zeros(feature_dim),
        }
    }

    pub fn init<R: Rng + ?Sized>(pooling: Pooling, feature_dim: usize, attention_dim: usize, rng: &mut R) -> Self {
        let attention = (pooling == Pooling::Attention).then(|| AttentionParams::init(feature_dim, attention_dim, rng));
        Self {
            pooling,
            attention,
            classifier: ClassifierParams::init(feature_dim, rng),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.classifier.w.len()
    }

    pub fn attention_dim(&self) -> Option<usize> {
        self.attention.as_ref().map(AttentionParams::attention_dim)
    }

    /// Gradient container with the same layout.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.pooling, self.feature_dim(), self.attention_dim().unwrap_or(0))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.attention, self.pooling) {
            (Some(a), Pooling::Attention) => {
                a.validate()?;
                if a.feature_dim() != self.feature_dim() {
                    return Err(Error::shape("MilHead", self.feature_dim(), a.feature_dim()));
                }
            }
            (None, Pooling::Mean | Pooling::Max) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{} pooling with attention parameters {}",
                    self.pooling,
                    if self.attention.is_some() { "present" } else { "missing" }
                )))
            }
        }
        Ok(())
    }

    fn check_features(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.feature_dim() {
            return Err(Error::shape(
                "classifier head",
                format!("features with {} columns", self.feature_dim()),
                format!("{} columns", features.cols()),
            ));
        }
        Ok(())
    }

    fn pool(&self, features: &Matrix) -> Result<PoolTrace> {
        self.check_features(features)?;
        let m = features.rows();
        let h = features.cols();
        Ok(match self.pooling {
            Pooling::Attention => {
                let attn = self.attention.as_ref().expect("validated head");
                let trace = attention_forward(attn, features)?;
                PoolTrace {
                    pooled: trace.aggregate.clone(),
                    weights: trace.weights.clone(),
                    detail: PoolDetail::Attention(trace),
                }
            }
            Pooling::Mean => {
                let mut pooled = vec![0.0; h];
                for row in features.row_iter() {
                    crate::kernel::axpy(1.0, row, &mut pooled);
                }
                pooled.iter_mut().for_each(|v| *v /= m as f64);
                PoolTrace {
                    pooled,
                    weights: vec![1.0 / m as f64; m],
                    detail: PoolDetail::Mean,
                }
            }
            Pooling::Max => {
                let mut argmax = vec![0usize; h];
                let mut pooled = features.row(0).to_vec();
                for (j, row) in features.row_iter().enumerate().skip(1) {
                    for k in 0..h {
                        if row[k] > pooled[k] {
                            pooled[k] = row[k];
                            argmax[k] = j;
                        }
                    }
                }
                // Explanation weight: share of coordinates each row wins.
                let mut weights = vec![0.0; m];
                for &j in &argmax {
                    weights[j] += 1.0 / h as f64;
                }
                PoolTrace {
                    pooled,
                    weights,
                    detail: PoolDetail::Max(argmax),
                }
            }
        })
    }

    /// Forward pass for one user: probability and per-instance weights.
    pub fn forward(&self, features: &Matrix) -> Result<(f64, Vec<f64>)> {
        let trace = self.pool(features)?;
        let z = dot(&self.classifier.w, &trace.pooled) + self.classifier.b;
        Ok((sigmoid(z), trace.weights))
    }

    /// BCE loss of one user, gradients added into `grads`. Returns the loss
    /// and `dL/dF`.
    pub fn loss_and_grad(&self, features: &Matrix, label: f64, grads: &mut MilHead) -> Result<(f64, Matrix)> {
        let trace = self.pool(features)?;
        let z = dot(&self.classifier.w, &trace.pooled) + self.classifier.b;
        let p = sigmoid(z);
        let loss = bce_term(p, label);
        // d/dz of the clamped loss: p - y inside the clip range, 0 outside.
        let dz = if (LOG_CLIP..=1.0 - LOG_CLIP).contains(&p) { p - label } else { 0.0 };

        crate::kernel::axpy(dz, &trace.pooled, &mut grads.classifier.w);
        grads.classifier.b += dz;
        let d_pooled: Vec<f64> = self.classifier.w.iter().map(|w| dz * w).collect();

        let m = features.rows();
        let d_features = match &trace.detail {
            PoolDetail::Attention(t) => {
                let attn = self.attention.as_ref().expect("validated head");
                let g = grads.attention.as_mut().expect("gradient layout matches head");
                attention_backward(attn, features, t, &d_pooled, g)
            }
            PoolDetail::Mean => {
                let mut d = Matrix::zeros(m, features.cols());
                let row: Vec<f64> = d_pooled.iter().map(|v| v / m as f64).collect();
                for j in 0..m {
                    d.row_mut(j).copy_from_slice(&row);
                }
                d
            }
            PoolDetail::Max(argmax) => {
                let mut d = Matrix::zeros(m, features.cols());
                for (k, &j) in argmax.iter().enumerate() {
                    d.set(j, k, d_pooled[k]);
                }
                d
            }
        };
        Ok((loss, d_features))
    }

    /// Mean BCE over a batch and its gradient. Per-user work runs in
    /// parallel; the reduction is in batch order.
    pub fn batch_loss_and_grad(&self, features: &[&Matrix], labels: &[f64]) -> Result<(f64, MilHead)> {
        if features.len() != labels.len() || features.is_empty() {
            return Err(Error::shape("batch_loss_and_grad", features.len(), labels.len()));
        }
        let parts: Vec<(f64, MilHead)> = features
            .par_iter()
            .zip(labels.par_iter())
            .map(|(f, &y)| {
                let mut g = self.zeros_like();
                let (loss, _) = self.loss_and_grad(f, y, &mut g)?;
                Ok((loss, g))
            })
            .collect::<Result<_>>()?;
        let mut total = self.zeros_like();
        let mut loss = 0.0;
        for (l, g) in &parts {
            loss += l;
            accumulate(&mut total, g);
        }
        let n = features.len() as f64;
        total.scale(1.0 / n);
        Ok((loss / n, total))
    }

    /// Mean BCE over a set of users without gradients.
    pub fn mean_loss(&self, features: &[&Matrix], labels: &[f64]) -> Result<f64> {
        let probs = self.probabilities(features)?;
        bce_loss(&probs, labels)
    }

    pub fn probabilities(&self, features: &[&Matrix]) -> Result<Vec<f64>> {
        features
            .par_iter()
            .map(|f| self.forward(f).map(|(p, _)| p))
            .collect()
    }
}

impl ParamSet for MilHead {
    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        let mut out = self.attention.as_ref().map(|a| a.blocks()).unwrap_or_default();
        out.push(ParamBlock {
            name: "classifier.w".into(),
            rows: 1,
            cols: self.classifier.w.len(),
            data: &self.classifier.w,
        });
        out.push(ParamBlock {
            name: "classifier.b".into(),
            rows: 1,
            cols: 1,
            data: std::slice::from_ref(&self.classifier.b),
        });
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.attention.as_mut().map(|a| a.blocks_mut()).unwrap_or_default();
        out.push(&mut self.classifier.w);
        out.push(std::slice::from_mut(&mut self.classifier.b));
        out
    }
}

struct PoolTrace {
    pooled: Vec<f64>,
    weights: Vec<f64>,
    detail: PoolDetail,
}

enum PoolDetail {
    Attention(AttentionTrace),
    Mean,
    Max(Vec<usize>),
}

fn bce_term(p: f64, y: f64) -> f64 {
    let p = p.clamp(LOG_CLIP, 1.0 - LOG_CLIP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Mean binary cross-entropy, `-(1/N) Σ [y ln ŷ + (1-y) ln(1-ŷ)]`, with
/// `ŷ` clamped into `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(probabilities: &[f64], labels: &[f64]) -> Result<f64> {
    if probabilities.is_empty() || probabilities.len() != labels.len() {
        return Err(Error::shape("bce_loss", probabilities.len(), labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidArgument(format!("label must be 0 or 1, got {bad}")));
    }
    let total: f64 = probabilities.iter().zip(labels).map(|(&p, &y)| bce_term(p, y)).sum();
    Ok(total / probabilities.len() as f64)
}

/// Attention pooling followed by the logistic unit, for one user.
pub fn classify_forward(
    attention: &AttentionParams,
    classifier: &ClassifierParams,
    features: &Matrix,
) -> Result<(f64, Vec<f64>)> {
    let head = MilHead {
        pooling: Pooling::Attention,
        attention: Some(attention.clone()),
        classifier: classifier.clone(),
    };
    head.validate()?;
    head.forward(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{finite_difference_gradcheck, stream_rng, Stream};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_head(pooling: Pooling, h: usize, seed: u64) -> MilHead {
        let mut rng = stream_rng(seed, Stream::HeadInit);
        let mut head = MilHead::zeros(pooling, h, h);
        for block in head.blocks_mut() {
            block.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        head
    }

    fn random_features(m: usize, h: usize, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed, Stream::Synth);
        Matrix::new(m, h, (0..m * h).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_classifier_gives_half() {
        let head = random_head(Pooling::Attention, 3, 1);
        let clf = ClassifierParams::zeros(3);
        let (p, _) = classify_forward(head.attention.as_ref().unwrap(), &clf, &random_features(4, 3, 2)).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn single_feature_hand_value() {
        let attn = AttentionParams::zeros(1, 1);
        let clf = ClassifierParams { w: vec![1.0], b: 0.0 };
        let f = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let (p, w) = classify_forward(&attn, &clf, &f).unwrap();
        assert!((p - 0.7310585786300049).abs() < 1e-15);
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn bce_examples() {
        assert!(bce_loss(&[1.0 - 1e-12], &[1.0]).unwrap() < 1e-11);
        assert!((bce_loss(&[0.5], &[1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(&[0.5], &[0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let expected = (-(0.9f64.ln()) - 0.8f64.ln()) / 2.0;
        assert!((bce_loss(&[0.9, 0.2], &[1.0, 0.0]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.164252).abs() < 1e-6);
        assert!(bce_loss(&[0.5], &[2.0]).is_err());
        assert!(bce_loss(&[], &[]).is_err());
        // Clamping keeps certain-but-wrong predictions finite.
        let worst = bce_loss(&[0.0], &[1.0]).unwrap();
        assert!((worst - (-(1e-12f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn pooled_weights_sum_to_one() {
        for pooling in Pooling::ALL {
            let head = random_head(pooling, 3, 3);
            let (_, w) = head.forward(&random_features(5, 3, 4)).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{pooling}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let feats = [random_features(3, 3, 10), random_features(5, 3, 11)];
        let refs: Vec<&Matrix> = feats.iter().collect();
        let labels = [1.0, 0.0];
        for pooling in Pooling::ALL {
            let head = random_head(pooling, 3, 12);
            let (_, grads) = head.batch_loss_and_grad(&refs, &labels).unwrap();
            let r = finite_difference_gradcheck(
                |flat| {
                    let mut h = head.clone();
                    h.set_flat(flat).unwrap();
                    h.mean_loss(&refs, &labels).unwrap()
                },
                &head.to_flat(),
                &grads.to_flat(),
                1e-4,
            )
            .unwrap();
            assert!(r.max_rel_error < 1e-4, "{pooling}: {r:?}");
        }
    }

    #[test]
    fn mismatched_layouts_rejected() {
        let mut head = random_head(Pooling::Mean, 3, 13);
        assert!(head.validate().is_ok());
        head.pooling = Pooling::Attention;
        assert!(head.validate().is_err());
        assert!(random_head(Pooling::Max, 3, 14).forward(&random_features(2, 4, 1)).is_err());
    }

    proptest! {
        #[test]
        fn probability_in_open_interval(seed in any::<u64>(), m in 1usize..8) {
            let head = random_head(Pooling::Attention, 4, seed);
            let (p, _) = head.forward(&random_features(m, 4, seed ^ 1)).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }

        #[test]
        fn bce_non_negative(p in 0.0f64..=1.0, y in 0u8..2) {
            prop_assert!(bce_loss(&[p], &[f64::from(y)]).unwrap() >= 0.0);
        }
    }
}
