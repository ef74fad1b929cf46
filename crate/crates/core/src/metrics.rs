//! Confusion matrix, accuracy, per-class precision/recall/F1 and the
//! text and CSV renderings of a classification report.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::EpochStats;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} outside {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("{names} class names for {classes} classes")]
    NameCount { names: usize, classes: usize },
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() || y_true.is_empty() {
        return Err(MetricsError::LengthMismatch { truth: y_true.len(), pred: y_pred.len() });
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= classes {
                return Err(MetricsError::InvalidLabel { label, classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Multiclass accuracy: `trace / total`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    match cm.total() {
        0 => Err(MetricsError::EmptyMatrix),
        total => Ok(cm.trace() as f64 / total as f64),
    }
}

/// Binary accuracy `(TP + TN) / (TP + TN + FN + FP)`.
pub fn binary_accuracy(tp: u64, tn: u64, fp: u64, fn_: u64) -> f64 {
    (tp + tn) as f64 / (tp + tn + fp + fn_) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when a zero denominator forced a metric to 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub names: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total: u64,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den > 0.0 {
        (num / den, false)
    } else {
        (0.0, true)
    }
}

pub fn precision_recall_f1(cm: &ConfusionMatrix, names: &[String]) -> Result<ClassificationReport, MetricsError> {
    let classes = cm.classes();
    if names.len() != classes {
        return Err(MetricsError::NameCount { names: names.len(), classes });
    }
    let total = cm.total();
    let accuracy = accuracy(cm)?;
    let per_class: Vec<ClassMetrics> = (0..classes)
        .map(|c| {
            let tp = cm.counts[c][c] as f64;
            let (precision, p_undef) = ratio(tp, cm.col_sum(c) as f64);
            let (recall, r_undef) = ratio(tp, cm.row_sum(c) as f64);
            let (f1, f_undef) = ratio(2.0 * precision * recall, precision + recall);
            ClassMetrics { precision, recall, f1, support: cm.row_sum(c), undefined: p_undef || r_undef || f_undef }
        })
        .collect();
    let k = classes as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
    };
    let w = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64;
    let weighted_avg = Averages { precision: w(|m| m.precision), recall: w(|m| m.recall), f1: w(|m| m.f1) };
    Ok(ClassificationReport { names: names.to_vec(), per_class, accuracy, macro_avg, weighted_avg, total })
}

/// Capitalized emotion names in label-code order.
pub fn emotion_names() -> Vec<String> {
    crate::dataset::EmotionLabel::ALL
        .iter()
        .map(|l| {
            let mut name = l.name().to_string();
            name[..1].make_ascii_uppercase();
            name
        })
        .collect()
}

const NAME_WIDTH: usize = 12;

/// Fixed-width table with precision, recall, F1-score and support
/// columns; per-class rows, then accuracy, macro avg and weighted avg.
pub fn render_report(report: &ClassificationReport) -> String {
    let width = report.names.iter().map(String::len).max().unwrap_or(0).max(NAME_WIDTH);
    let mut out = String::new();
    let line = |out: &mut String, name: &str, cells: [&str; 4]| {
        writeln!(out, "{name:>width$} {:>10} {:>10} {:>10} {:>10}", cells[0], cells[1], cells[2], cells[3])
            .expect("writing to a String");
    };
    line(&mut out, "", ["precision", "recall", "f1-score", "support"]);
    out.push('\n');
    for (name, m) in report.names.iter().zip(&report.per_class) {
        let cells = [format!("{:.2}", m.precision), format!("{:.2}", m.recall), format!("{:.2}", m.f1), m.support.to_string()];
        line(&mut out, name, [&cells[0], &cells[1], &cells[2], &cells[3]]);
    }
    out.push('\n');
    let total = report.total.to_string();
    line(&mut out, "accuracy", ["", "", &format!("{:.2}", report.accuracy), &total]);
    for (name, a) in [("macro avg", report.macro_avg), ("weighted avg", report.weighted_avg)] {
        let cells = [format!("{:.2}", a.precision), format!("{:.2}", a.recall), format!("{:.2}", a.f1)];
        line(&mut out, name, [&cells[0], &cells[1], &cells[2], &total]);
    }
    out
}

/// Numeric rows of a rendered report: `(name, values)` where per-class
/// and average rows carry four values and the accuracy row two.
pub fn parse_report(text: &str) -> Result<Vec<(String, Vec<f64>)>, MetricsError> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let numeric = tokens.iter().rev().take_while(|t| t.parse::<f64>().is_ok()).count();
        if numeric == 0 || numeric == tokens.len() {
            return Err(MetricsError::MalformedReport(line.to_string()));
        }
        let split = tokens.len() - numeric;
        let values = tokens[split..].iter().map(|t| t.parse().expect("checked numeric")).collect();
        rows.push((tokens[..split].join(" "), values));
    }
    Ok(rows)
}

pub fn write_report_csv<W: io::Write>(report: &ClassificationReport, out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "precision", "recall", "f1", "support"])?;
    for (name, m) in report.names.iter().zip(&report.per_class) {
        w.write_record([name.clone(), m.precision.to_string(), m.recall.to_string(), m.f1.to_string(), m.support.to_string()])?;
    }
    let total = report.total.to_string();
    w.write_record(["accuracy".into(), String::new(), String::new(), report.accuracy.to_string(), total.clone()])?;
    for (name, a) in [("macro avg", report.macro_avg), ("weighted avg", report.weighted_avg)] {
        w.write_record([name.into(), a.precision.to_string(), a.recall.to_string(), a.f1.to_string(), total.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Header row and first column carry the class names.
pub fn write_confusion_csv<W: io::Write>(cm: &ConfusionMatrix, names: &[String], out: W) -> Result<(), MetricsError> {
    if names.len() != cm.classes() {
        return Err(MetricsError::NameCount { names: names.len(), classes: cm.classes() });
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::from("true\\pred")];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in names.iter().zip(&cm.counts) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(u64::to_string));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history_csv<W: io::Write>(history: &[EpochStats], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in history {
        w.write_record([
            s.epoch.to_string(),
            s.train_loss.to_string(),
            s.train_accuracy.to_string(),
            opt(s.test_loss),
            opt(s.test_accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}
