//! Manifest clips to the augmented feature table.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serpent_core::audio::{crop, read_wav, resample, AudioClip};
use serpent_core::augment::augment_set;
use serpent_core::dataset::{read_manifest, SourceTag};
use serpent_core::dsp::extract_features;

use super::{write_features, FeatureRow};
use crate::config::PipelineConfig;

/// Largest tolerated share of clips that fail to decode or featurize.
const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractSummary {
    pub clips: usize,
    pub failed: usize,
    pub rows: usize,
    pub features: PathBuf,
}

/// Resamples, crops and expands one clip, returning one feature vector per
/// variant in `SourceTag::EXPANSION` order.
pub fn features_for_clip(clip: &AudioClip, cfg: &PipelineConfig, stream_id: u64) -> Result<Vec<Vec<f64>>> {
    let clip = resample(clip, cfg.sample_rate_hz)?;
    let clip = crop(&clip, cfg.crop.offset_s, cfg.crop.duration_s, cfg.crop.pad_to_duration)?;
    augment_set(&clip, &cfg.augment, stream_id)?
        .iter()
        .map(|v| Ok(extract_features(v, &cfg.frame)?.0.to_vec()))
        .collect()
}

/// Reads the manifest and writes `features.csv` with three rows per clip.
/// Failing clips are logged and skipped; more than 1% failures is an error.
pub fn extract(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<ExtractSummary> {
    let manifest_path = cfg.manifest_path();
    let manifest = read_manifest(&manifest_path)
        .with_context(|| format!("reading {} (run ingest first)", manifest_path.display()))?;
    if manifest.is_empty() {
        bail!("manifest {} holds no clips", manifest_path.display());
    }

    let mut rows = Vec::with_capacity(manifest.len() * SourceTag::EXPANSION.len());
    let mut failed = 0;
    for (idx, entry) in manifest.iter().enumerate() {
        let result = read_wav(&entry.path)
            .map_err(anyhow::Error::from)
            .and_then(|clip| features_for_clip(&clip, cfg, idx as u64));
        match result {
            Ok(variants) => {
                for (tag, features) in SourceTag::EXPANSION.into_iter().zip(variants) {
                    rows.push(FeatureRow {
                        path: entry.path.display().to_string(),
                        corpus: entry.corpus,
                        label: entry.label,
                        source_tag: tag,
                        clip_index: idx,
                        features,
                    });
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("warning: skipping {}: {e:#}", entry.path.display());
            }
        }
    }

    let clips = manifest.len();
    if failed == clips {
        bail!("every clip failed feature extraction");
    }
    let features = cfg.features_path();
    write_features(&features, &rows)?;
    writeln!(out, "{} rows from {} clips written to {} ({failed} skipped)", rows.len(), clips - failed, features.display())?;
    if failed as f64 > MAX_FAILURE_RATE * clips as f64 {
        bail!("{failed} of {clips} clips failed, above the {}% tolerance", MAX_FAILURE_RATE * 100.0);
    }
    Ok(ExtractSummary { clips, failed, rows: rows.len(), features })
}
