//! Training and held-out evaluation with report artifacts.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serpent_core::dataset::{split, split_by_group, SplitResult};
use serpent_core::metrics::{
    confusion_matrix, emotion_names, precision_recall_f1, render_report, write_confusion_csv, write_history_csv,
    write_report_csv, ClassificationReport,
};
use serpent_core::nn::{self, Classifier, ModelCheckpoint, TrainingData};

use super::{read_features, FeatureRow};
use crate::config::PipelineConfig;
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSummary {
    pub train_rows: usize,
    pub test_rows: usize,
    /// `"test"`, or `"train"` when the split leaves no test rows.
    pub evaluated_on: &'static str,
    pub report: ClassificationReport,
}

fn split_rows(rows: &[FeatureRow], cfg: &PipelineConfig) -> Result<SplitResult> {
    let s = &cfg.split;
    let result = if s.by_clip {
        let groups: Vec<usize> = rows.iter().map(|r| r.clip_index).collect();
        split_by_group(&groups, s.test_fraction, s.seed)?
    } else {
        split(rows.len(), s.test_fraction, s.seed, s.shuffle)?
    };
    Ok(result)
}

fn gather(rows: &[FeatureRow], idx: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    idx.iter().map(|&i| (rows[i].features.clone(), rows[i].label.code())).unzip()
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), serpent_core::metrics::MetricsError>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Scores the checkpoint on the held-out rows and writes `report.txt`,
/// `report.csv`, `confusion.csv` and `history.csv` into the output directory.
fn evaluate_and_write(
    ckpt: &ModelCheckpoint,
    rows: &[FeatureRow],
    parts: &SplitResult,
    out_dir: &Path,
    out: &mut dyn Write,
) -> Result<EvaluationSummary> {
    let (idx, evaluated_on) = if parts.test_indices.is_empty() {
        (&parts.train_indices, "train")
    } else {
        (&parts.test_indices, "test")
    };
    let (xs, ys) = gather(rows, idx);
    let mut classifier = Classifier::from_checkpoint(ckpt)?;
    let predicted: Vec<usize> = classifier.predict_batch(&xs)?.into_iter().map(|p| p.label).collect();
    let names = emotion_names();
    let cm = confusion_matrix(&ys, &predicted, names.len())?;
    let report = precision_recall_f1(&cm, &names)?;

    let text = render_report(&report);
    write_atomic(&out_dir.join("report.txt"), text.as_bytes())?;
    write_atomic(&out_dir.join("report.csv"), &to_bytes(|b| write_report_csv(&report, b))?)?;
    write_atomic(&out_dir.join("confusion.csv"), &to_bytes(|b| write_confusion_csv(&cm, &names, b))?)?;
    write_atomic(&out_dir.join("history.csv"), &to_bytes(|b| write_history_csv(&ckpt.history, b))?)?;

    writeln!(out, "evaluated on {} {evaluated_on} rows", idx.len())?;
    write!(out, "{text}")?;
    Ok(EvaluationSummary {
        train_rows: parts.train_indices.len(),
        test_rows: parts.test_indices.len(),
        evaluated_on,
        report,
    })
}

/// Splits the feature table, trains, saves `model.json` and writes the
/// evaluation artifacts. Progress lines go to `out` once per epoch.
pub fn train(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<EvaluationSummary> {
    let features = cfg.features_path();
    let rows = read_features(&features).with_context(|| format!("reading {} (run extract first)", features.display()))?;
    let parts = split_rows(&rows, cfg)?;
    let (train_x, train_y) = gather(&rows, &parts.train_indices);
    let (test_x, test_y) = gather(&rows, &parts.test_indices);
    writeln!(out, "training on {} rows, testing on {}", train_x.len(), test_x.len())?;

    let data = TrainingData { train_x: &train_x, train_y: &train_y, test_x: &test_x, test_y: &test_y };
    let mut write_err = None;
    let ckpt = nn::train(data, &cfg.model, |stats| match writeln!(out, "{}", stats.progress_line()) {
        Ok(()) => true,
        Err(e) => {
            write_err = Some(e);
            false
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }

    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.checkpoint_path();
    ckpt.save(&path).with_context(|| format!("saving {}", path.display()))?;
    writeln!(out, "checkpoint written to {}", path.display())?;
    evaluate_and_write(&ckpt, &rows, &parts, &cfg.out_dir, out)
}

/// Re-evaluates a saved checkpoint on the same split of the feature table.
pub fn report(cfg: &PipelineConfig, checkpoint: Option<&Path>, out: &mut dyn Write) -> Result<EvaluationSummary> {
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.checkpoint_path());
    let ckpt = ModelCheckpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let features = cfg.features_path();
    let rows = read_features(&features).with_context(|| format!("reading {}", features.display()))?;
    let parts = split_rows(&rows, cfg)?;
    evaluate_and_write(&ckpt, &rows, &parts, &cfg.out_dir, out)
}
