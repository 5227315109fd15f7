use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{evaluate, MetricsReport};
use crate::corpus::{require_labels, EmbeddedUser, Label, Split};
use crate::error::{Error, Result};
use crate::kernel::Matrix;
use crate::lstm::{extract_features, AutoencoderParams};
use crate::training::{fit_head, HeadConfig, LabeledFeatures, Pooling, TrainConfig};

/// Frozen features of one split with their labels.
#[derive(Debug, Clone)]
pub struct FeatureSplit {
    pub features: Vec<Matrix>,
    pub labels: Vec<Label>,
}

impl FeatureSplit {
    pub fn from_corpus(params: &AutoencoderParams, users: &[EmbeddedUser]) -> Result<Self> {
        let labels = require_labels(users)?;
        let features = extract_features(params, users)?.into_iter().map(|f| f.features).collect();
        Ok(Self { features, labels })
    }

    fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.as_f64()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    pub pooling: Pooling,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub arms: Vec<AblationArm>,
}

impl AblationReport {
    pub fn arm(&self, pooling: Pooling) -> Option<&AblationArm> {
        self.arms.iter().find(|a| a.pooling == pooling)
    }
}

/// Trains an attention, a mean and a max pooling head on the same frozen
/// features with the same budget and seed, and scores each on `test`.
pub fn pooling_ablation(
    train: &FeatureSplit,
    val: &FeatureSplit,
    test: &FeatureSplit,
    config: &TrainConfig,
) -> Result<AblationReport> {
    config.validate()?;
    if test.features.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let (train_y, val_y) = (train.targets(), val.targets());
    let arms = Pooling::ALL
        .par_iter()
        .map(|&pooling| {
            let head_config = HeadConfig {
                pooling,
                ..config.head.clone()
            };
            let fit = fit_head(
                LabeledFeatures::new(&train.features, &train_y)?,
                LabeledFeatures::new(&val.features, &val_y)?,
                &head_config,
                &config.early_stopping,
                config.seed,
            )?;
            let refs: Vec<&Matrix> = test.features.iter().collect();
            let probs = fit.head.probabilities(&refs)?;
            Ok(AblationArm {
                pooling,
                epochs_run: fit.epochs_run(),
                best_epoch: fit.best_epoch,
                test: evaluate(&probs, &test.labels, config.threshold)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        seed: config.seed,
        arms,
    })
}

/// Extracts features of every split with `params`, then runs
/// [`pooling_ablation`].
pub fn ablate_corpus(params: &AutoencoderParams, split: &Split<EmbeddedUser>, config: &TrainConfig) -> Result<AblationReport> {
    pooling_ablation(
        &FeatureSplit::from_corpus(params, &split.train)?,
        &FeatureSplit::from_corpus(params, &split.val)?,
        &FeatureSplit::from_corpus(params, &split.test)?,
        config,
    )
}
