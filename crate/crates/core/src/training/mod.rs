//! Supervised stage: pooling head, loss, training loop with early stopping,
//! prediction and checkpoint persistence.

pub mod checkpoint;
pub mod early_stop;
pub mod gradsuite;
pub mod head;
pub mod predict;
pub mod trainer;

pub use checkpoint::{AutoencoderCheckpoint, ModelCheckpoint, TrainingMetadata};
pub use early_stop::{EarlyStopping, EarlyStoppingConfig, Verdict};
pub use gradsuite::{run_gradient_suite, GradCheckResult, GradSuiteConfig, GradSuiteReport};
pub use head::{bce_loss, classify_forward, ClassifierParams, MilHead, Pooling};
pub use predict::{predict_corpus, predict_user, Prediction};
pub use trainer::{
    fit_head, fit_head_with, train_model, train_with_autoencoder, HeadConfig, HeadFit, LabeledFeatures, TrainConfig,
    TrainHistory, TrainOutput,
};
