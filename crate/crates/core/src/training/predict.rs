use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::ModelCheckpoint;
use crate::corpus::{EmbeddedUser, Label};
use crate::error::{Error, Result};
use crate::lstm::encode_sequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub user_id: String,
    pub probability: f64,
    pub label: Label,
    /// One weight per tweet, in timeline order.
    pub weights: Vec<f64>,
}

impl Prediction {
    /// Tweet ordinals sorted by descending weight (ties by ordinal).
    pub fn top_ordinals(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.weights.len()).collect();
        idx.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

/// Encode, pool and classify one user.
pub fn predict_user(checkpoint: &ModelCheckpoint, user: &EmbeddedUser) -> Result<Prediction> {
    if user.dim() != checkpoint.embedding_dim() {
        return Err(Error::Dimension {
            user: user.user_id.clone(),
            expected: checkpoint.embedding_dim(),
            actual: user.dim(),
        });
    }
    let features = encode_sequence(&checkpoint.autoencoder, &user.to_matrix())?;
    let (probability, weights) = checkpoint.head.forward(&features)?;
    let label = if probability >= checkpoint.threshold() {
        Label::Depressed
    } else {
        Label::Normal
    };
    Ok(Prediction {
        user_id: user.user_id.clone(),
        probability,
        label,
        weights,
    })
}

/// Predictions for every user, in corpus order.
pub fn predict_corpus(checkpoint: &ModelCheckpoint, users: &[EmbeddedUser]) -> Result<Vec<Prediction>> {
    users.par_iter().map(|u| predict_user(checkpoint, u)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{stream_rng, Stream};
    use crate::lstm::AutoencoderParams;
    use crate::training::{MilHead, Pooling, TrainConfig, TrainingMetadata};

    fn model(threshold: f64) -> ModelCheckpoint {
        let mut rng = stream_rng(5, Stream::HeadInit);
        let ae = AutoencoderParams::init(3, 4, &mut rng);
        let head = MilHead::init(Pooling::Attention, 4, 4, &mut rng);
        let meta = TrainingMetadata { epochs_run: 1, best_epoch: 1, best_val_loss: 0.0 };
        ModelCheckpoint::new(TrainConfig { threshold, ..TrainConfig::default() }, ae, head, meta).unwrap()
    }

    fn user(m: usize) -> EmbeddedUser {
        let data = (0..m * 3).map(|i| ((i as f32) * 0.37).sin()).collect();
        EmbeddedUser::new("u", None, 3, data).unwrap()
    }

    #[test]
    fn label_follows_threshold_and_is_pure() {
        let u = user(5);
        let p = predict_user(&model(0.5), &u).unwrap();
        assert_eq!(p, predict_user(&model(0.5), &u).unwrap());
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(p.weights.len(), 5);
        let at = predict_user(&model(p.probability), &u).unwrap();
        assert_eq!(at.label, Label::Depressed);
        let above = predict_user(&model((p.probability + 1.0) / 2.0), &u).unwrap();
        assert_eq!(above.label, Label::Normal);
    }

    #[test]
    fn dimension_mismatch() {
        let bad = EmbeddedUser::new("x", None, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(predict_user(&model(0.5), &bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn top_ordinals_order() {
        let p = Prediction {
            user_id: "u".into(),
            probability: 0.5,
            label: Label::Depressed,
            weights: vec![0.2, 0.5, 0.1, 0.2],
        };
        assert_eq!(p.top_ordinals(3), vec![1, 0, 3]);
        assert_eq!(p.top_ordinals(10).len(), 4);
    }
}
