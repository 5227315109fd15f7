use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::{ModelCheckpoint, TrainingMetadata};
use super::early_stop::{EarlyStopping, EarlyStoppingConfig, Verdict};
use super::head::{MilHead, Pooling};
use crate::corpus::{corpus_dim, require_labels, EmbeddedUser};
use crate::error::{Error, Result};
use crate::kernel::{adam_step, stream_rng, AdamConfig, AdamState, Matrix, ParamSet, Stream};
use crate::lstm::{extract_features, pretrain_autoencoder, AutoencoderConfig, PretrainOutput};

fn default_head_epochs() -> usize {
    100
}
fn default_head_lr() -> f64 {
    1e-2
}
fn default_threshold() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    /// Attention projection width; defaults to the feature width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention_dim: Option<usize>,
    #[serde(default = "default_head_epochs")]
    pub epochs: usize,
    #[serde(default = "default_head_lr")]
    pub learning_rate: f64,
    /// Users per Adam step; full batch when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default = "default_pooling")]
    pub pooling: Pooling,
}

fn default_pooling() -> Pooling {
    Pooling::Attention
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            attention_dim: None,
            epochs: default_head_epochs(),
            learning_rate: default_head_lr(),
            batch_size: None,
            pooling: Pooling::Attention,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("head epochs must be positive".into()));
        }
        if self.attention_dim == Some(0) {
            return Err(Error::Config("attention_dim must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        AdamConfig::with_learning_rate(self.learning_rate).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub autoencoder: AutoencoderConfig,
    #[serde(default)]
    pub head: HeadConfig,
    #[serde(default)]
    pub early_stopping: EarlyStoppingConfig,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            autoencoder: AutoencoderConfig::default(),
            head: HeadConfig::default(),
            early_stopping: EarlyStoppingConfig::default(),
            threshold: default_threshold(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.autoencoder.validate()?;
        self.head.validate()?;
        self.early_stopping.validate()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        Ok(())
    }

    /// Autoencoder settings with the root seed applied.
    pub fn autoencoder_config(&self) -> AutoencoderConfig {
        AutoencoderConfig {
            seed: self.seed,
            ..self.autoencoder.clone()
        }
    }
}

/// Loss curves of both stages. `train_loss[e]` and `val_loss[e]` are the
/// mean BCE over the respective split after head epoch `e + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub autoencoder: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: ModelCheckpoint,
    pub history: TrainHistory,
}

/// Result of supervised head training on frozen features.
#[derive(Debug, Clone)]
pub struct HeadFit {
    pub head: MilHead,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl HeadFit {
    pub fn epochs_run(&self) -> usize {
        self.val_loss.len()
    }
}

/// Labeled feature matrices borrowed for head training.
#[derive(Debug, Clone, Copy)]
pub struct LabeledFeatures<'a> {
    pub features: &'a [Matrix],
    pub labels: &'a [f64],
}

impl<'a> LabeledFeatures<'a> {
    pub fn new(features: &'a [Matrix], labels: &'a [f64]) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::shape("labeled features", features.len(), labels.len()));
        }
        Ok(Self { features, labels })
    }

    fn refs(&self) -> Vec<&'a Matrix> {
        self.features.iter().collect()
    }
}

/// Trains a pooling head on fixed features, validating after every epoch
/// on `val` and keeping the parameters of the best validation epoch.
pub fn fit_head(
    train: LabeledFeatures<'_>,
    val: LabeledFeatures<'_>,
    head_config: &HeadConfig,
    early_stopping: &EarlyStoppingConfig,
    seed: u64,
) -> Result<HeadFit> {
    if val.features.is_empty() {
        return Err(Error::InvalidArgument("validation set is empty".into()));
    }
    let val_refs = val.refs();
    fit_head_with(train, head_config, early_stopping, seed, |_, head| {
        head.mean_loss(&val_refs, val.labels)
    })
}

/// As [`fit_head`], with the validation loss supplied by `validate`, which
/// receives the 1-based epoch and the current head.
pub fn fit_head_with<F>(
    train: LabeledFeatures<'_>,
    head_config: &HeadConfig,
    early_stopping: &EarlyStoppingConfig,
    seed: u64,
    mut validate: F,
) -> Result<HeadFit>
where
    F: FnMut(usize, &MilHead) -> Result<f64>,
{
    head_config.validate()?;
    let n = train.features.len();
    if n == 0 {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let feature_dim = train.features[0].cols();
    let attention_dim = head_config.attention_dim.unwrap_or(feature_dim);
    let mut head = MilHead::init(
        head_config.pooling,
        feature_dim,
        attention_dim,
        &mut stream_rng(seed, Stream::HeadInit),
    );
    let mut stopper = EarlyStopping::new(*early_stopping)?;
    let mut adam = AdamState::new(head.num_params(), AdamConfig::with_learning_rate(head_config.learning_rate));
    let mut shuffle_rng = stream_rng(seed, Stream::HeadShuffle);
    let batch_size = head_config.batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let train_refs = train.refs();

    let mut flat = head.to_flat();
    let mut best = head.clone();
    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();

    for epoch in 1..=head_config.epochs {
        if batch_size < n {
            order.shuffle(&mut shuffle_rng);
        }
        for chunk in order.chunks(batch_size) {
            let feats: Vec<&Matrix> = chunk.iter().map(|&i| train_refs[i]).collect();
            let labels: Vec<f64> = chunk.iter().map(|&i| train.labels[i]).collect();
            let (_, grads) = head.batch_loss_and_grad(&feats, &labels)?;
            adam_step(&mut flat, &grads.to_flat(), &mut adam)?;
            head.set_flat(&flat)?;
        }
        let tl = head.mean_loss(&train_refs, train.labels)?;
        let vl = validate(epoch, &head)?;
        if !tl.is_finite() || !vl.is_finite() {
            return Err(Error::NonFinite(format!(
                "head loss at epoch {epoch}: train {tl}, validation {vl}"
            )));
        }
        train_loss.push(tl);
        val_loss.push(vl);
        match stopper.observe(epoch, vl) {
            Verdict::Improved => best = head.clone(),
            Verdict::Continue => {}
            Verdict::Stop => break,
        }
    }
    let (best_epoch, best_val_loss) = stopper.best().expect("at least one epoch ran");
    Ok(HeadFit {
        head: best,
        train_loss,
        val_loss,
        best_epoch,
        best_val_loss,
    })
}

fn check_split(name: &str, users: &[EmbeddedUser]) -> Result<Vec<f64>> {
    if users.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} set is empty")));
    }
    corpus_dim(users)?;
    Ok(require_labels(users)?.into_iter().map(|l| l.as_f64()).collect())
}

/// Both training stages: unsupervised autoencoder pretraining on the
/// training embeddings, then head training on the frozen encoder features.
pub fn train_model(train: &[EmbeddedUser], val: &[EmbeddedUser], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    check_split("training", train)?;
    check_split("validation", val)?;
    let pretrained = pretrain_autoencoder(train, &config.autoencoder_config())?;
    train_with_autoencoder(pretrained, train, val, config)
}

/// Second stage only, reusing an already pretrained autoencoder.
pub fn train_with_autoencoder(
    pretrained: PretrainOutput,
    train: &[EmbeddedUser],
    val: &[EmbeddedUser],
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    let train_labels = check_split("training", train)?;
    let val_labels = check_split("validation", val)?;
    let train_feats: Vec<Matrix> = extract_features(&pretrained.params, train)?
        .into_iter()
        .map(|f| f.features)
        .collect();
    let val_feats: Vec<Matrix> = extract_features(&pretrained.params, val)?
        .into_iter()
        .map(|f| f.features)
        .collect();
    let fit = fit_head(
        LabeledFeatures::new(&train_feats, &train_labels)?,
        LabeledFeatures::new(&val_feats, &val_labels)?,
        &config.head,
        &config.early_stopping,
        config.seed,
    )?;
    let metadata = TrainingMetadata {
        epochs_run: fit.epochs_run(),
        best_epoch: fit.best_epoch,
        best_val_loss: fit.best_val_loss,
    };
    let history = TrainHistory {
        autoencoder: pretrained.loss_history,
        train_loss: fit.train_loss,
        val_loss: fit.val_loss,
        best_epoch: fit.best_epoch,
    };
    let checkpoint = ModelCheckpoint::new(config.clone(), pretrained.params, fit.head, metadata)?;
    Ok(TrainOutput { checkpoint, history })
}
