//! Confusion matrix, classification report, one-vs-rest ROC/AUC, and their
//! serialized forms.

mod emit;
mod roc;

use serde::{Deserialize, Serialize};

pub use emit::{
    confusion_csv, emit_report, parse_confusion_csv, render_table, report_csv, report_json, roc_csv, roc_file_name,
    EvalReport, ReportFormat,
};
pub use roc::{roc_auc, RocCurve};

use crate::error::MetricsError;

/// Counts with rows = true class, columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Validates squareness and names; class names default to indices.
    pub fn new(counts: Vec<Vec<u64>>, class_names: Option<Vec<String>>) -> Result<Self, MetricsError> {
        let c = counts.len();
        if c == 0 {
            return Err(MetricsError::Empty);
        }
        if let Some(row) = counts.iter().position(|r| r.len() != c) {
            return Err(MetricsError::Inconsistent(format!(
                "row {row} of a {c}-class matrix has {} cells",
                counts[row].len()
            )));
        }
        let class_names = class_names.unwrap_or_else(|| (0..c).map(|i| i.to_string()).collect());
        if class_names.len() != c {
            return Err(MetricsError::Inconsistent(format!("{} class names for {c} classes", class_names.len())));
        }
        Ok(Self { class_names, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn with_class_names(self, names: Vec<String>) -> Result<Self, MetricsError> {
        Self::new(self.counts, Some(names))
    }
}

pub fn confusion(true_labels: &[usize], predicted: &[usize], c: usize) -> Result<ConfusionMatrix, MetricsError> {
    if true_labels.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch(true_labels.len(), predicted.len()));
    }
    if true_labels.is_empty() || c == 0 {
        return Err(MetricsError::Empty);
    }
    let mut counts = vec![vec![0u64; c]; c];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        if let Some(&label) = [t, p].iter().find(|&&l| l >= c) {
            return Err(MetricsError::LabelOutOfRange { label, classes: c });
        }
        counts[t][p] += 1;
    }
    ConfusionMatrix::new(counts, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Metrics whose denominator was zero and were reported as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_division: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: AverageMetrics,
    pub weighted_avg: AverageMetrics,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn report(cm: &ConfusionMatrix) -> Result<ClassificationReport, MetricsError> {
    let c = cm.num_classes();
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::AllZero);
    }
    let mut classes = Vec::with_capacity(c);
    for i in 0..c {
        let tp = cm.counts[i][i];
        let predicted: u64 = (0..c).map(|r| cm.counts[r][i]).sum();
        let support: u64 = cm.counts[i].iter().sum();
        let mut zero_division = Vec::new();
        let precision = ratio(tp, predicted).unwrap_or_else(|| {
            zero_division.push("precision".to_string());
            0.0
        });
        let recall = ratio(tp, support).unwrap_or_else(|| {
            zero_division.push("recall".to_string());
            0.0
        });
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            zero_division.push("f1".to_string());
            0.0
        };
        classes.push(ClassMetrics { name: cm.class_names[i].clone(), precision, recall, f1, support, zero_division });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).sum::<f64>() / c as f64;
    let weighted =
        |f: fn(&ClassMetrics) -> f64| classes.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64;
    let macro_avg = AverageMetrics {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        support: total,
    };
    let weighted_avg = AverageMetrics {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        support: total,
    };
    Ok(ClassificationReport { classes, accuracy: cm.trace() as f64 / total as f64, macro_avg, weighted_avg })
}
