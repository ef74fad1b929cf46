//! One module per subcommand, plus the feature table they share.

mod diarize;
mod extract;
mod ingest;
mod predict;
mod train;

pub use diarize::{diarize_file, DiarizeSummary};
pub use extract::{extract, features_for_clip, ExtractSummary};
pub use ingest::{ingest, IngestSummary};
pub use predict::{predict, PredictOptions, PredictionOutput, ProbabilityMap, SegmentPrediction};
pub use train::{report, train, EvaluationSummary};

use std::path::Path;

use anyhow::{bail, Context, Result};
use serpent_core::dataset::{Corpus, EmotionLabel, SourceTag};
use serpent_core::dsp::FEATURE_LEN;

use crate::fsutil::write_atomic;

const FIXED_COLUMNS: [&str; 5] = ["path", "corpus", "emotion", "source_tag", "clip_index"];

/// One augmented variant of one corpus clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub path: String,
    pub corpus: Corpus,
    pub label: EmotionLabel,
    pub source_tag: SourceTag,
    /// Manifest row the variant came from; groups variants of one clip.
    pub clip_index: usize,
    pub features: Vec<f64>,
}

pub fn feature_header() -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..FEATURE_LEN).map(|i| format!("f{i:02}")))
        .collect()
}

pub fn encode_features(rows: &[FeatureRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(feature_header())?;
    for r in rows {
        let mut rec = vec![
            r.path.clone(),
            r.corpus.to_string(),
            r.label.to_string(),
            r.source_tag.to_string(),
            r.clip_index.to_string(),
        ];
        rec.extend(r.features.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.into_inner().context("flushing feature table")
}

pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    write_atomic(path, &encode_features(rows)?)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != feature_header() {
        bail!("{}: unexpected feature table header", path.display());
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let parse = || -> Result<FeatureRow> {
            let features = (5..5 + FEATURE_LEN)
                .map(|c| rec[c].parse::<f64>().with_context(|| format!("column {}", header[c])))
                .collect::<Result<Vec<f64>>>()?;
            if features.iter().any(|x| !x.is_finite()) {
                bail!("non-finite feature value");
            }
            Ok(FeatureRow {
                path: rec[0].to_string(),
                corpus: rec[1].parse()?,
                label: rec[2].parse()?,
                source_tag: rec[3].parse()?,
                clip_index: rec[4].parse()?,
                features,
            })
        };
        rows.push(parse().with_context(|| format!("{} line {line}", path.display()))?);
    }
    Ok(rows)
}
