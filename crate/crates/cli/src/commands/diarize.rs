//! Stand-alone diarization to RTTM.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serpent_core::audio::{read_wav, resample, AudioClip};
use serpent_core::diarize::{diarize, write_rttm, DiarizeConfig, Segment};

use crate::config::PipelineConfig;
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct DiarizeSummary {
    pub segments: Vec<Segment>,
    pub rttm: PathBuf,
}

/// RTTM file id for a recording: its file stem.
pub(crate) fn file_id(wav: &Path) -> String {
    wav.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "recording".into())
}

pub(crate) fn load_clip(wav: &Path, cfg: &PipelineConfig) -> Result<AudioClip> {
    let clip = read_wav(wav).with_context(|| format!("reading {}", wav.display()))?;
    Ok(resample(&clip, cfg.sample_rate_hz)?)
}

/// Diarizes a clip and writes its segments as RTTM, by default to
/// `<out_dir>/<stem>.rttm`.
pub(crate) fn diarize_and_write(
    clip: &AudioClip,
    wav: &Path,
    dcfg: &DiarizeConfig,
    out_dir: &Path,
    rttm_out: Option<&Path>,
) -> Result<DiarizeSummary> {
    let segments = diarize(clip, dcfg)?;
    let id = file_id(wav);
    let rttm = rttm_out.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join(format!("{id}.rttm")));
    write_atomic(&rttm, write_rttm(&id, &segments).as_bytes())?;
    Ok(DiarizeSummary { segments, rttm })
}

pub fn diarize_file(
    cfg: &PipelineConfig,
    wav: &Path,
    rttm_out: Option<&Path>,
    out: &mut dyn Write,
) -> Result<DiarizeSummary> {
    let clip = load_clip(wav, cfg)?;
    let summary = diarize_and_write(&clip, wav, &cfg.diarize, &cfg.out_dir, rttm_out)?;
    for s in &summary.segments {
        writeln!(out, "{:9.3} {:9.3} {}", s.start_s, s.end_s, s.speaker)?;
    }
    writeln!(out, "{} segments written to {}", summary.segments.len(), summary.rttm.display())?;
    Ok(summary)
}
