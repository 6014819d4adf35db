use serde::{Deserialize, Serialize};

use crate::error::MetricsError;

/// One-vs-rest ROC staircase for one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class_index: usize,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC of `class_index` against the rest, using each sample's probability
/// for that class. Thresholds sweep the distinct scores in descending order;
/// equal scores form a single step. AUC is the trapezoidal area.
pub fn roc_auc<S: AsRef<[f64]>>(
    true_labels: &[usize],
    scores: &[S],
    class_index: usize,
) -> Result<RocCurve, MetricsError> {
    if true_labels.len() != scores.len() {
        return Err(MetricsError::LengthMismatch(true_labels.len(), scores.len()));
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let c = scores[0].as_ref().len();
    let mut pairs = Vec::with_capacity(scores.len());
    for (row, (s, &label)) in scores.iter().zip(true_labels).enumerate() {
        let s = s.as_ref();
        if s.len() != c || class_index >= c {
            return Err(MetricsError::ScoreWidth { row, got: s.len(), expected: c.max(class_index + 1) });
        }
        if label >= c {
            return Err(MetricsError::LabelOutOfRange { label, classes: c });
        }
        if s[class_index].is_nan() {
            return Err(MetricsError::Inconsistent(format!("score row {row} is NaN")));
        }
        pairs.push((s[class_index], label == class_index));
    }
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::DegenerateClass(class_index));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (pos as f64, neg as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let score = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == score {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().expect("nonempty");
        let (x1, y1) = (fp as f64 / n, tp as f64 / p);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve { class_index, points, auc })
}
