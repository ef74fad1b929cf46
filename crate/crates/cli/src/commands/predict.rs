//! Emotion prediction for one recording, whole or per speaker segment.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serpent_core::audio::{crop, AudioClip};
use serpent_core::dataset::EmotionLabel;
use serpent_core::dsp::extract_features;
use serpent_core::nn::{Classifier, ModelCheckpoint, Prediction};

use super::diarize::{diarize_and_write, load_clip};
use crate::config::PipelineConfig;

/// Class probabilities keyed by emotion name.
pub type ProbabilityMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentPrediction {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
    pub label: String,
    pub probabilities: ProbabilityMap,
}

/// Whole-clip output carries `label` and `probabilities`; diarized output
/// carries `segments` and the `rttm` path instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionOutput {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<ProbabilityMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentPrediction>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rttm: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct PredictOptions {
    /// Defaults to `<out_dir>/model.json`.
    pub checkpoint: Option<PathBuf>,
    pub diarize: bool,
    pub num_speakers: Option<usize>,
    pub rttm_out: Option<PathBuf>,
}

fn named(p: &Prediction) -> Result<(String, ProbabilityMap)> {
    let name = |code: usize| {
        EmotionLabel::from_code(code).map(|l| l.name().to_string()).context("model emits more classes than emotions")
    };
    let probs = p.probabilities.iter().enumerate().map(|(c, &v)| Ok((name(c)?, v))).collect::<Result<_>>()?;
    Ok((name(p.label)?, probs))
}

fn classify(classifier: &mut Classifier, clip: &AudioClip, cfg: &PipelineConfig) -> Result<Prediction> {
    let features = extract_features(clip, &cfg.frame)?;
    Ok(classifier.predict(&features.0)?)
}

/// Classifies a recording and writes the JSON result to `out`. With
/// diarization each speaker segment is classified separately and an RTTM
/// file is written alongside.
pub fn predict(cfg: &PipelineConfig, wav: &Path, opts: &PredictOptions, out: &mut dyn Write) -> Result<PredictionOutput> {
    let ckpt_path = opts.checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_path());
    let ckpt = ModelCheckpoint::load(&ckpt_path).with_context(|| format!("loading {}", ckpt_path.display()))?;
    let mut classifier = Classifier::from_checkpoint(&ckpt)?;
    let clip = load_clip(wav, cfg)?;
    let file = wav.display().to_string();

    let result = if opts.diarize || opts.num_speakers.is_some() {
        let mut dcfg = cfg.diarize.clone();
        if opts.num_speakers.is_some() {
            dcfg.num_speakers = opts.num_speakers;
        }
        dcfg.validate()?;
        let summary = diarize_and_write(&clip, wav, &dcfg, &cfg.out_dir, opts.rttm_out.as_deref())?;
        let mut segments = Vec::with_capacity(summary.segments.len());
        for seg in &summary.segments {
            let piece = crop(&clip, seg.start_s, seg.duration(), false)?;
            let p = classify(&mut classifier, &piece, cfg)
                .with_context(|| format!("segment {:.3}-{:.3} s", seg.start_s, seg.end_s))?;
            let (label, probabilities) = named(&p)?;
            segments.push(SegmentPrediction {
                start: seg.start_s,
                end: seg.end_s,
                speaker: seg.speaker.clone(),
                label,
                probabilities,
            });
        }
        PredictionOutput {
            file,
            label: None,
            probabilities: None,
            segments: Some(segments),
            rttm: Some(summary.rttm.display().to_string()),
        }
    } else {
        let piece = crop(&clip, cfg.crop.offset_s, cfg.crop.duration_s, cfg.crop.pad_to_duration)?;
        let (label, probabilities) = named(&classify(&mut classifier, &piece, cfg)?)?;
        PredictionOutput { file, label: Some(label), probabilities: Some(probabilities), segments: None, rttm: None }
    };
    serde_json::to_writer_pretty(&mut *out, &result)?;
    writeln!(out)?;
    Ok(result)
}
