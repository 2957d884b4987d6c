//! Confusion counts, derived rates, and fold aggregation.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::{stratified_folds, ATTACK};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Counts with attack (1) as the positive class.
pub fn confusion(predictions: &[usize], truth: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("no predictions".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        let p = p == ATTACK as usize;
        match (p, t == ATTACK) {
            (true, true) => cm.tp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Rates derived from a confusion matrix. `None` marks a zero denominator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub specificity: Option<f64>,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub f_measure: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub mcc: Option<f64>,
    pub detection_rate: Option<f64>,
    pub confusion: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub const METRIC_NAMES: [&str; 9] = [
    "accuracy",
    "specificity",
    "sensitivity",
    "precision",
    "f_measure",
    "fpr",
    "fnr",
    "mcc",
    "detection_rate",
];

impl MetricsReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "accuracy" => self.accuracy,
            "specificity" => self.specificity,
            "sensitivity" => self.sensitivity,
            "precision" => self.precision,
            "f_measure" => self.f_measure,
            "fpr" => self.fpr,
            "fnr" => self.fnr,
            "mcc" => self.mcc,
            "detection_rate" => self.detection_rate,
            _ => None,
        }
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::EmptyInput("confusion matrix is all zero".into()));
    }
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let accuracy = ratio(tp + tn, tp + tn + fp + fn_);
    let sensitivity = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    let precision = ratio(tp, tp + fp);
    let f_measure = match (precision, sensitivity) {
        (Some(p), Some(r)) => ratio(2.0 * p * r, p + r),
        _ => None,
    };
    let fpr = ratio(fp, fp + tn);
    let fnr = ratio(fn_, fn_ + tp);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, den);

    let mut report = MetricsReport {
        accuracy,
        specificity,
        sensitivity,
        precision,
        f_measure,
        fpr,
        fnr,
        mcc,
        detection_rate: sensitivity,
        confusion: *cm,
        notes: Vec::new(),
    };
    for name in METRIC_NAMES {
        if report.get(name).is_none() {
            report.notes.push(format!("{name} undefined: zero denominator"));
        }
    }
    Ok(report)
}

pub fn evaluate(predictions: &[usize], truth: &[u8]) -> Result<MetricsReport> {
    compute_metrics(&confusion(predictions, truth)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub std: Option<f64>,
}

/// Mean and population std over the defined values; `None` if any fold is undefined.
pub fn summarize(values: &[Option<f64>]) -> MetricSummary {
    let defined: Option<Vec<f64>> = values.iter().copied().collect();
    match defined {
        Some(v) if !v.is_empty() => {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            MetricSummary {
                mean: Some(mean),
                std: Some(var.sqrt()),
            }
        }
        _ => MetricSummary { mean: None, std: None },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub per_fold: Vec<MetricsReport>,
    pub summary: std::collections::BTreeMap<String, MetricSummary>,
}

impl CvSummary {
    pub fn from_folds(per_fold: Vec<MetricsReport>) -> Self {
        let summary = METRIC_NAMES
            .iter()
            .map(|&name| {
                let vals: Vec<Option<f64>> = per_fold.iter().map(|r| r.get(name)).collect();
                (name.to_string(), summarize(&vals))
            })
            .collect();
        Self {
            k: per_fold.len(),
            per_fold,
            summary,
        }
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.summary.get(name).and_then(|s| s.mean)
    }

    pub fn std(&self, name: &str) -> Option<f64> {
        self.summary.get(name).and_then(|s| s.std)
    }

    /// Fold rows followed by a `mean±std` row.
    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        const COLS: [&str; 3] = ["accuracy", "detection_rate", "fpr"];
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fold", COLS[0], COLS[1], COLS[2]])?;
        let cell = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"));
        for (i, r) in self.per_fold.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(COLS.iter().map(|c| cell(r.get(c))));
            w.write_record(&rec)?;
        }
        let mut rec = vec!["mean±std".to_string()];
        rec.extend(COLS.iter().map(|c| match (self.mean(c), self.std(c)) {
            (Some(m), Some(s)) => format!("{m:.6}±{s:.6}"),
            _ => "undefined".to_string(),
        }));
        w.write_record(&rec)?;
        w.flush().map_err(|e| Error::io("<cv table>", e))?;
        Ok(())
    }

    pub fn write_table_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_table(std::io::BufWriter::new(f))
    }
}

/// Runs `fold_fn(train_indices, test_indices, fold)` over stratified folds.
///
/// Folds execute in parallel; the result order follows fold order.
pub fn kfold_cv<F>(labels: &[u8], k: usize, seed: u64, fold_fn: F) -> Result<CvSummary>
where
    F: Fn(&[usize], &[usize], usize) -> Result<MetricsReport> + Sync,
{
    let folds = stratified_folds(labels, k, seed)?;
    let n = labels.len();
    let reports = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let mut held = vec![false; n];
            test.iter().for_each(|&i| held[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !held[i]).collect();
            fold_fn(&train, test, f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvSummary::from_folds(reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[1, 0, 1], &[1, 0, 1]).unwrap(), cm(2, 1, 0, 0));
        let c = confusion(&[0, 1, 0], &[1, 0, 1]).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert_eq!(confusion(&[1, 0, 0, 1], &[1, 1, 0, 0]).unwrap(), cm(1, 1, 1, 1));
        assert!(matches!(confusion(&[1], &[1, 0]), Err(Error::Shape(_))));
    }

    #[test]
    fn spot_values() {
        let r = compute_metrics(&cm(95, 90, 10, 5)).unwrap();
        assert!((r.accuracy.unwrap() - 0.925).abs() < 1e-12);
        assert!((r.sensitivity.unwrap() - 0.95).abs() < 1e-12);
        assert!((r.specificity.unwrap() - 0.90).abs() < 1e-12);
        assert!((r.precision.unwrap() - 0.9048).abs() < 1e-4);
        assert!((r.f_measure.unwrap() - 0.9268).abs() < 1e-4);
        assert!((r.fpr.unwrap() - 0.10).abs() < 1e-12);
        assert!((r.fnr.unwrap() - 0.05).abs() < 1e-12);
        assert!((r.mcc.unwrap() - 0.8511).abs() < 1e-4);
        assert_eq!(r.detection_rate, r.sensitivity);
    }

    #[test]
    fn perfect_and_chance() {
        let r = compute_metrics(&cm(50, 50, 0, 0)).unwrap();
        assert_eq!((r.accuracy, r.mcc, r.fpr, r.fnr), (Some(1.0), Some(1.0), Some(0.0), Some(0.0)));
        assert_eq!(compute_metrics(&cm(25, 25, 25, 25)).unwrap().mcc, Some(0.0));
    }

    #[test]
    fn undefined_metrics_are_marked() {
        let r = compute_metrics(&cm(0, 10, 0, 0)).unwrap();
        assert_eq!(r.sensitivity, None);
        assert_eq!(r.precision, None);
        assert_eq!(r.mcc, None);
        assert_eq!(r.specificity, Some(1.0));
        assert!(r.notes.iter().any(|n| n.starts_with("sensitivity")));
        assert!(matches!(compute_metrics(&cm(0, 0, 0, 0)), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn population_std() {
        let v = [0.972, 0.985, 0.979, 0.983, 0.978].map(Some);
        let s = summarize(&v);
        assert!((s.mean.unwrap() - 0.9794).abs() < 1e-9);
        assert!((s.std.unwrap() - 0.0045).abs() < 5e-4);
    }

    #[test]
    fn table_shape() {
        let reports: Vec<MetricsReport> = (0..5)
            .map(|i| compute_metrics(&cm(10 + i, 10, 1, 1)).unwrap())
            .collect();
        let mut out = Vec::new();
        CvSummary::from_folds(reports).write_table(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[6].starts_with("mean±std,"));
    }
}
