use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ClassificationReport, ConfusionMatrix, RocCurve};
use crate::error::MetricsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    /// `report.json`: report, confusion counts and ROC curves in one document.
    Json,
    /// `report.csv`, `confusion.csv` and one `roc_<class>.csv` per class.
    Csv,
}

impl FromStr for ReportFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(MetricsError::UnknownFormat(s.to_string())),
        }
    }
}

/// Everything an evaluation run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub report: ClassificationReport,
    pub confusion: ConfusionMatrix,
    pub roc: Vec<RocCurve>,
}

impl EvalReport {
    pub fn new(
        report: ClassificationReport,
        confusion: ConfusionMatrix,
        roc: Vec<RocCurve>,
    ) -> Result<Self, MetricsError> {
        let c = confusion.num_classes();
        if report.classes.len() != c {
            return Err(MetricsError::Inconsistent(format!(
                "report has {} classes, confusion {c}",
                report.classes.len()
            )));
        }
        if let Some(r) = roc.iter().find(|r| r.class_index >= c) {
            return Err(MetricsError::Inconsistent(format!("ROC curve for class {} of {c}", r.class_index)));
        }
        Ok(Self { report, confusion, roc })
    }
}

pub fn report_json(eval: &EvalReport) -> String {
    serde_json::to_string_pretty(eval).expect("report serializes") + "\n"
}

fn csv_text(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 input")
}

/// Header `class,<names...>`, then one `name,counts...` row per true class.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let header = std::iter::once("class".to_string()).chain(cm.class_names.iter().cloned()).collect();
    let rows = cm
        .class_names
        .iter()
        .zip(&cm.counts)
        .map(|(name, row)| std::iter::once(name.clone()).chain(row.iter().map(u64::to_string)).collect());
    csv_text(std::iter::once(header).chain(rows))
}

pub fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix, MetricsError> {
    let bad = |m: String| MetricsError::Inconsistent(m);
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut counts = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let row = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<u64>().map_err(|e| bad(format!("{v:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        counts.push(row);
    }
    ConfusionMatrix::new(counts, Some(names))
}

/// Table-shaped CSV: one row per class, then accuracy, macro and weighted
/// averages. The accuracy row fills only the f1 and support columns.
pub fn report_csv(report: &ClassificationReport) -> String {
    let mut rows = vec![["class", "precision", "recall", "f1", "support"].map(String::from).to_vec()];
    for m in &report.classes {
        rows.push(vec![
            m.name.clone(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            m.support.to_string(),
        ]);
    }
    let total = report.macro_avg.support.to_string();
    rows.push(vec!["accuracy".into(), String::new(), String::new(), report.accuracy.to_string(), total]);
    for (label, a) in [("macro avg", &report.macro_avg), ("weighted avg", &report.weighted_avg)] {
        rows.push(vec![
            label.into(),
            a.precision.to_string(),
            a.recall.to_string(),
            a.f1.to_string(),
            a.support.to_string(),
        ]);
    }
    csv_text(rows)
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let header = vec!["fpr".to_string(), "tpr".to_string()];
    csv_text(std::iter::once(header).chain(curve.points.iter().map(|(x, y)| vec![x.to_string(), y.to_string()])))
}

/// `roc_<class>.csv` with characters outside `[A-Za-z0-9._-]` replaced by `_`.
pub fn roc_file_name(class_name: &str) -> String {
    let safe: String = class_name
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() || matches!(ch, '.' | '_' | '-') { ch } else { '_' })
        .collect();
    format!("roc_{safe}.csv")
}

/// Writes the artifacts for `format` into `out_dir` and returns their paths.
pub fn emit_report(eval: &EvalReport, format: ReportFormat, out_dir: &Path) -> Result<Vec<PathBuf>, MetricsError> {
    let mut files = Vec::new();
    match format {
        ReportFormat::Json => files.push((out_dir.join("report.json"), report_json(eval))),
        ReportFormat::Csv => {
            files.push((out_dir.join("report.csv"), report_csv(&eval.report)));
            files.push((out_dir.join("confusion.csv"), confusion_csv(&eval.confusion)));
            for curve in &eval.roc {
                let name = &eval.confusion.class_names[curve.class_index];
                files.push((out_dir.join(roc_file_name(name)), roc_csv(curve)));
            }
        }
    }
    fs::create_dir_all(out_dir).map_err(|source| MetricsError::Io { path: out_dir.to_path_buf(), source })?;
    let mut written = Vec::with_capacity(files.len());
    for (path, text) in files {
        fs::write(&path, text).map_err(|source| MetricsError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}

/// Fixed-width text table with two decimals, in the familiar
/// precision/recall/f1-score/support layout.
pub fn render_table(report: &ClassificationReport) -> String {
    let width = report.classes.iter().map(|m| m.name.len()).chain([12]).max().unwrap_or(12);
    let mut out = String::new();
    let _ = writeln!(out, "{:>width$} {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1-score", "support");
    let _ = writeln!(out);
    for m in &report.classes {
        let _ =
            writeln!(out, "{:>width$} {:>9.2} {:>9.2} {:>9.2} {:>9}", m.name, m.precision, m.recall, m.f1, m.support);
    }
    let _ = writeln!(out);
    let total = report.macro_avg.support;
    let _ = writeln!(out, "{:>width$} {:>9} {:>9} {:>9.2} {:>9}", "accuracy", "", "", report.accuracy, total);
    for (label, a) in [("macro avg", &report.macro_avg), ("weighted avg", &report.weighted_avg)] {
        let _ =
            writeln!(out, "{:>width$} {:>9.2} {:>9.2} {:>9.2} {:>9}", label, a.precision, a.recall, a.f1, a.support);
    }
    out
}
