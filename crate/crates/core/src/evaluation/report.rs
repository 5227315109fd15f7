use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{classification_metrics, confusion_counts, ClassificationMetrics, ConfusionCounts};
use super::roc::{roc_curve, RocCurve, RocPoint};
use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub users: usize,
    pub threshold: f64,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub metrics: ClassificationMetrics,
    /// Absent when the evaluated users are all of one class.
    pub roc: Option<RocCurve>,
}

impl MetricsReport {
    pub fn auc(&self) -> Option<f64> {
        self.roc.as_ref().map(|r| r.auc)
    }
}

/// Counts, metrics and (when both classes are present) ROC for one set of
/// scored users.
pub fn evaluate(probabilities: &[f64], truth: &[Label], threshold: f64) -> Result<MetricsReport> {
    let counts = confusion_counts(probabilities, truth, threshold)?;
    let metrics = classification_metrics(&counts)?;
    let both = truth.iter().any(|y| y.is_positive()) && truth.iter().any(|y| !y.is_positive());
    let roc = if both { Some(roc_curve(probabilities, truth)?) } else { None };
    Ok(MetricsReport {
        users: truth.len(),
        threshold,
        counts,
        metrics,
        roc,
    })
}

/// Per-epoch losses; `val_loss` may be absent (autoencoder pretraining).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

pub fn loss_rows(train: &[f64], val: Option<&[f64]>) -> Vec<LossRow> {
    train
        .iter()
        .enumerate()
        .map(|(i, &t)| LossRow {
            epoch: i + 1,
            train_loss: t,
            val_loss: val.and_then(|v| v.get(i).copied()),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub loss_curve: Option<PathBuf>,
    pub roc: Option<PathBuf>,
    pub confusion: PathBuf,
}

/// Writes `report.json`, `confusion.csv`, `roc.csv` (when a curve exists)
/// and `loss_curve.csv` (when a history is given) under `dir`.
pub fn emit_report(report: &MetricsReport, history: Option<&[LossRow]>, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&report_path, json + "\n").map_err(|e| Error::io(&report_path, e))?;

    let confusion = dir.join("confusion.csv");
    write_csv(&confusion, std::slice::from_ref(&report.counts))?;

    let roc = match &report.roc {
        Some(curve) => {
            let path = dir.join("roc.csv");
            write_csv(&path, &curve.points)?;
            Some(path)
        }
        None => None,
    };
    let loss_curve = match history {
        Some(rows) => {
            let path = dir.join("loss_curve.csv");
            write_loss_curve(&path, rows)?;
            Some(path)
        }
        None => None,
    };
    Ok(ReportFiles {
        report: report_path,
        loss_curve,
        roc,
        confusion,
    })
}

/// `epoch,train_loss,val_loss`; the last column is empty when absent.
pub fn write_loss_curve(path: &Path, rows: &[LossRow]) -> Result<()> {
    write_csv(path, rows)
}

pub fn read_loss_curve(path: &Path) -> Result<Vec<LossRow>> {
    read_csv(path)
}

pub fn read_roc_csv(path: &Path) -> Result<Vec<RocPoint>> {
    read_csv(path)
}

pub fn read_confusion_csv(path: &Path) -> Result<ConfusionCounts> {
    let rows: Vec<ConfusionCounts> = read_csv(path)?;
    match rows.as_slice() {
        [c] => Ok(*c),
        _ => Err(Error::Format(format!("{}: expected exactly one confusion row", path.display()))),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[u8]) -> Vec<Label> {
        v.iter().map(|&b| Label::from_u8(b).unwrap()).collect()
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let probs = [0.91, 0.1 + 0.2, 1.0 / 3.0, 0.05, 0.7];
        let truth = labels(&[1, 0, 1, 0, 1]);
        let report = evaluate(&probs, &truth, 0.5).unwrap();
        let history = loss_rows(&[0.7, 0.6, 0.55], Some(&[0.72, 0.65, 0.66]));
        let files = emit_report(&report, Some(&history), dir.path()).unwrap();

        assert_eq!(read_roc_csv(files.roc.as_ref().unwrap()).unwrap(), report.roc.as_ref().unwrap().points);
        let counts = read_confusion_csv(&files.confusion).unwrap();
        assert_eq!(counts, report.counts);
        assert_eq!(counts.total(), 5);
        assert_eq!(read_loss_curve(files.loss_curve.as_ref().unwrap()).unwrap(), history);

        let header = fs::read_to_string(&files.confusion).unwrap();
        assert!(header.starts_with("tp,fp,fn,tn\n"), "{header}");
        let roc = fs::read_to_string(files.roc.unwrap()).unwrap();
        assert!(roc.starts_with("threshold,fpr,tpr\ninf,0.0,0.0\n"), "{roc}");
        let json: MetricsReport = serde_json::from_str(&fs::read_to_string(files.report).unwrap()).unwrap();
        assert_eq!(json, report);
    }

    #[test]
    fn missing_validation_column_is_blank() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ae.csv");
        let rows = loss_rows(&[2.0, 1.0], None);
        write_loss_curve(&path, &rows).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "epoch,train_loss,val_loss\n1,2.0,\n2,1.0,\n");
        assert_eq!(read_loss_curve(&path).unwrap(), rows);
    }

    #[test]
    fn single_class_has_no_roc() {
        let report = evaluate(&[0.2, 0.8], &labels(&[0, 0]), 0.5).unwrap();
        assert!(report.roc.is_none());
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report, None, dir.path()).unwrap();
        assert!(files.roc.is_none() && files.loss_curve.is_none());
    }

    #[test]
    fn unwritable_directory() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let report = evaluate(&[0.2, 0.8], &labels(&[0, 1]), 0.5).unwrap();
        assert!(emit_report(&report, None, &blocker.join("sub")).is_err());
    }
}
