//! Metrics, ROC/AUC, pooling ablation and report files.

pub mod ablation;
pub mod metrics;
pub mod report;
pub mod roc;

pub use ablation::{ablate_corpus, pooling_ablation, AblationArm, AblationReport, FeatureSplit};
pub use metrics::{classification_metrics, confusion_counts, ClassificationMetrics, ConfusionCounts, MetricWarning};
pub use report::{
    emit_report, evaluate, loss_rows, read_confusion_csv, read_loss_curve, read_roc_csv, write_loss_curve, LossRow,
    MetricsReport, ReportFiles,
};
pub use roc::{roc_curve, RocCurve, RocPoint};
