//! Confusion matrix, accuracy, and averaged one-vs-rest precision/recall.
//!
//! Multiclass accuracy is trace over total. Precision and recall are
//! computed per class one-vs-rest and averaged; a class with a zero
//! denominator contributes 0 rather than being skipped.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Unweighted mean over classes.
    #[default]
    Macro,
    /// Mean weighted by each class's true support.
    Weighted,
}

/// Entry `(i, j)` counts samples of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.get(class, class)
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.n_classes).filter(|&i| i != class).map(|i| self.get(i, class)).sum()
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.n_classes).filter(|&j| j != class).map(|j| self.get(class, j)).sum()
    }

    pub fn true_negatives(&self, class: usize) -> u64 {
        self.total() - self.true_positives(class) - self.false_positives(class) - self.false_negatives(class)
    }

    /// Per-class precision; 0 for a class that is never predicted.
    pub fn precision_per_class(&self) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| ratio(self.true_positives(c), self.true_positives(c) + self.false_positives(c)))
            .collect()
    }

    /// Per-class recall; 0 for a class with no true samples.
    pub fn recall_per_class(&self) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| ratio(self.true_positives(c), self.true_positives(c) + self.false_negatives(c)))
            .collect()
    }

    fn support(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|j| self.get(class, j)).sum()
    }

    fn average(&self, per_class: Vec<f64>, averaging: Averaging) -> f64 {
        match averaging {
            Averaging::Macro => per_class.iter().sum::<f64>() / self.n_classes as f64,
            Averaging::Weighted => {
                let total = self.total() as f64;
                per_class
                    .iter()
                    .enumerate()
                    .map(|(c, v)| v * self.support(c) as f64 / total)
                    .sum()
            }
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for code in [t, p] {
            if code >= n_classes {
                return Err(Error::CodeOutOfRange { code, n_classes });
            }
        }
        counts[t * n_classes + p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

fn non_empty(cm: &ConfusionMatrix) -> Result<()> {
    if cm.total() == 0 {
        Err(Error::EmptyMatrix)
    } else {
        Ok(())
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    non_empty(cm)?;
    let trace: u64 = (0..cm.n_classes).map(|c| cm.get(c, c)).sum();
    Ok(trace as f64 / cm.total() as f64)
}

pub fn precision(cm: &ConfusionMatrix, averaging: Averaging) -> Result<f64> {
    non_empty(cm)?;
    Ok(cm.average(cm.precision_per_class(), averaging))
}

pub fn recall(cm: &ConfusionMatrix, averaging: Averaging) -> Result<f64> {
    non_empty(cm)?;
    Ok(cm.average(cm.recall_per_class(), averaging))
}

pub fn precision_macro(cm: &ConfusionMatrix) -> Result<f64> {
    precision(cm, Averaging::Macro)
}

pub fn recall_macro(cm: &ConfusionMatrix) -> Result<f64> {
    recall(cm, Averaging::Macro)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl MetricsReport {
    pub fn from_confusion(model: impl Into<String>, cm: &ConfusionMatrix, averaging: Averaging) -> Result<Self> {
        Ok(MetricsReport {
            model: model.into(),
            accuracy: accuracy(cm)?,
            precision: precision(cm, averaging)?,
            recall: recall(cm, averaging)?,
        })
    }

    pub fn csv_row(&self) -> String {
        format!("{},{:.4},{:.4},{:.4}", self.model, self.accuracy, self.precision, self.recall)
    }
}

pub const REPORT_CSV_HEADER: &str = "model,accuracy,precision,recall";

pub fn reports_to_csv(reports: &[MetricsReport]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

pub fn reports_from_csv(text: &str) -> Result<Vec<MetricsReport>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::MalformedRow { line: 1, reason: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != REPORT_CSV_HEADER.split(',').collect::<Vec<_>>() {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header `{REPORT_CSV_HEADER}`"),
        });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("`{}` is not a number", &row[i]),
            })
        };
        out.push(MetricsReport {
            model: row[0].to_string(),
            accuracy: num(1)?,
            precision: num(2)?,
            recall: num(3)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> ConfusionMatrix {
        confusion(&[0, 0, 1, 2], &[0, 1, 1, 2], 3).unwrap()
    }

    #[test]
    fn identity_diagonal() {
        let cm = confusion(&[0, 1, 2, 3], &[0, 1, 2, 3], 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(cm.get(i, j), u64::from(i == j));
            }
        }
        assert_eq!(accuracy(&cm).unwrap(), 1.0);
        assert_eq!(precision_macro(&cm).unwrap(), 1.0);
        assert_eq!(recall_macro(&cm).unwrap(), 1.0);
    }

    #[test]
    fn direct_tally() {
        let cm = example();
        assert_eq!((cm.get(0, 0), cm.get(0, 1), cm.get(1, 1), cm.get(2, 2)), (1, 1, 1, 1));
        assert_eq!(cm.total(), 4);
        assert_eq!(cm, confusion(&[2, 1, 0, 0], &[2, 1, 1, 0], 3).unwrap());
    }

    #[test]
    fn four_sample_metrics() {
        let cm = example();
        assert_eq!(accuracy(&cm).unwrap(), 0.75);
        let expected = (1.0 + 0.5 + 1.0) / 3.0;
        assert!((precision_macro(&cm).unwrap() - expected).abs() < 1e-12);
        let expected = (0.5 + 1.0 + 1.0) / 3.0;
        assert!((recall_macro(&cm).unwrap() - expected).abs() < 1e-12);
        assert!((precision_macro(&cm).unwrap() - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn all_wrong() {
        let cm = confusion(&[0, 1, 0], &[1, 0, 1], 2).unwrap();
        assert_eq!(accuracy(&cm).unwrap(), 0.0);
    }

    #[test]
    fn absent_classes_contribute_zero() {
        let cm = confusion(&[1, 1, 1], &[1, 1, 1], 4).unwrap();
        assert_eq!(recall_macro(&cm).unwrap(), 0.25);
        assert_eq!(precision_macro(&cm).unwrap(), 0.25);
    }

    #[test]
    fn weighted_averaging() {
        let cm = example();
        // supports 2, 1, 1 with recalls 0.5, 1, 1
        assert!((recall(&cm, Averaging::Weighted).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn one_vs_rest_counts() {
        let cm = example();
        assert_eq!(cm.true_positives(1), 1);
        assert_eq!(cm.false_positives(1), 1);
        assert_eq!(cm.false_negatives(0), 1);
        assert_eq!(cm.true_negatives(2), 3);
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion(&[0], &[0, 1], 2), Err(Error::LengthMismatch { .. })));
        assert!(matches!(confusion(&[0, 4], &[0, 1], 4), Err(Error::CodeOutOfRange { code: 4, .. })));
        assert!(matches!(confusion(&[], &[], 4), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn csv_round_trip() {
        let reports = vec![
            MetricsReport { model: "KNN".into(), accuracy: 0.71, precision: 0.27, recall: 0.25 },
            MetricsReport { model: "CNN-RNN".into(), accuracy: 0.72, precision: 0.73, recall: 0.729 },
        ];
        let text = reports_to_csv(&reports);
        assert_eq!(text, "model,accuracy,precision,recall\nKNN,0.7100,0.2700,0.2500\nCNN-RNN,0.7200,0.7300,0.7290\n");
        assert_eq!(reports_from_csv(&text).unwrap(), reports);
    }
}
