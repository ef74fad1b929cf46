//! Speaker diarization: energy VAD, MFCC statistics embeddings,
//! average-linkage clustering, RTTM text and diarization error rate.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::dsp::{self, DspError, FrameConfig};

#[derive(Debug, Error)]
pub enum DiarizeError {
    #[error("clip of {len} samples is shorter than one {window}-sample window")]
    ClipTooShort { len: usize, window: usize },
    #[error("segment [{start_s:.3}, {end_s:.3}) spans fewer than 2 analysis frames")]
    SegmentTooShort { start_s: f64, end_s: f64 },
    #[error("malformed RTTM line {line}: {reason}")]
    MalformedRttm { line: usize, reason: String },
    #[error("reference contains no scored speech")]
    EmptyReference,
    #[error("{0} speakers exceed the exhaustive mapping limit")]
    TooManySpeakers(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub speaker: String,
}

impl Segment {
    pub fn new(start_s: f64, end_s: f64, speaker: impl Into<String>) -> Self {
        Self { start_s, end_s, speaker: speaker.into() }
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

pub const EMBEDDING_LEN: usize = 40;
const N_MELS: usize = 40;
const N_MFCC: usize = 20;
const MAX_MAPPED_SPEAKERS: usize = 8;

/// MFCC means followed by MFCC standard deviations over a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerEmbedding(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiarizeConfig {
    pub window_s: f64,
    pub min_speech_s: f64,
    pub min_gap_s: f64,
    pub energy_percentile: f64,
    pub threshold: f64,
    pub num_speakers: Option<usize>,
    pub frame: FrameConfig,
}

impl Default for DiarizeConfig {
    fn default() -> Self {
        Self {
            window_s: 0.03,
            min_speech_s: 0.25,
            min_gap_s: 0.20,
            energy_percentile: 30.0,
            threshold: 0.35,
            num_speakers: None,
            frame: FrameConfig::default(),
        }
    }
}

impl DiarizeConfig {
    pub fn validate(&self) -> Result<(), DiarizeError> {
        let ok = self.window_s > 0.0
            && self.min_speech_s >= 0.0
            && self.min_gap_s >= 0.0
            && (0.0..=100.0).contains(&self.energy_percentile)
            && self.threshold >= 0.0
            && self.num_speakers != Some(0);
        if !ok {
            return Err(DiarizeError::InvalidArgument(format!("invalid diarization settings {self:?}")));
        }
        self.frame.validate()?;
        Ok(())
    }
}

/// Linear-interpolated percentile (`p` in 0..=100) of unsorted values.
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

const ENERGY_FLOOR: f64 = 1e-4;

/// Energy gate. A window is speech when its RMS exceeds twice the
/// `energy_percentile` level, capped at half the 95th percentile so steady
/// signals are not split, and never below an absolute floor.
fn energy_threshold(window_rms: &[f64], energy_percentile: f64) -> f64 {
    let low = percentile(window_rms, energy_percentile);
    let high = percentile(window_rms, 95.0);
    (2.0 * low).min(0.5 * high).max(ENERGY_FLOOR)
}

/// Speech regions from non-overlapping RMS windows. Gaps shorter than
/// `min_gap_s` are bridged, then regions shorter than `min_speech_s` are
/// dropped.
pub fn vad_segments(clip: &AudioClip, cfg: &DiarizeConfig) -> Result<Vec<(f64, f64)>, DiarizeError> {
    cfg.validate()?;
    let sr = clip.sample_rate_hz() as f64;
    let window = ((cfg.window_s * sr).round() as usize).max(1);
    if clip.len() < window {
        return Err(DiarizeError::ClipTooShort { len: clip.len(), window });
    }
    let window_rms: Vec<f64> = clip
        .samples()
        .chunks_exact(window)
        .map(|w| (w.iter().map(|x| x * x).sum::<f64>() / window as f64).sqrt())
        .collect();
    let threshold = energy_threshold(&window_rms, cfg.energy_percentile);

    let mut regions: Vec<(usize, usize)> = Vec::new();
    for (i, &r) in window_rms.iter().enumerate() {
        if r <= threshold {
            continue;
        }
        match regions.last_mut() {
            Some((_, end)) if *end == i => *end = i + 1,
            _ => regions.push((i, i + 1)),
        }
    }
    let to_s = |w: usize| (w * window) as f64 / sr;
    let mut bridged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in regions {
        let (start, end) = (to_s(a), to_s(b));
        match bridged.last_mut() {
            Some((_, prev_end)) if start - *prev_end < cfg.min_gap_s => *prev_end = end,
            _ => bridged.push((start, end)),
        }
    }
    bridged.retain(|(s, e)| e - s >= cfg.min_speech_s);
    Ok(bridged)
}

/// Per-coefficient mean and standard deviation of the segment's MFCCs.
pub fn segment_embedding(
    clip: &AudioClip,
    start_s: f64,
    end_s: f64,
    frame: &FrameConfig,
) -> Result<SpeakerEmbedding, DiarizeError> {
    let too_short = || DiarizeError::SegmentTooShort { start_s, end_s };
    let sr = clip.sample_rate_hz() as f64;
    let a = ((start_s.max(0.0) * sr).round() as usize).min(clip.len());
    let b = ((end_s * sr).round() as usize).min(clip.len());
    if b <= a || frame.num_frames(b - a).map_or(true, |n| n < 2) {
        return Err(too_short());
    }
    let sub = AudioClip::clamped(clip.samples()[a..b].to_vec(), clip.sample_rate_hz());
    let frames = dsp::mfcc(&sub, frame, N_MELS, N_MFCC)?;
    let n = frames.len() as f64;
    let mut mean = vec![0.0; N_MFCC];
    for f in &frames {
        mean.iter_mut().zip(f).for_each(|(m, x)| *m += x / n);
    }
    let mut std = vec![0.0; N_MFCC];
    for f in &frames {
        std.iter_mut().zip(f).zip(&mean).for_each(|((s, x), m)| *s += (x - m) * (x - m) / n);
    }
    std.iter_mut().for_each(|s| *s = s.sqrt());
    mean.extend(std);
    Ok(SpeakerEmbedding(mean))
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na > 0.0, nb > 0.0) {
        (true, true) => 1.0 - dot / (na * nb),
        (false, false) => 0.0,
        _ => 1.0,
    }
}

/// Average-linkage agglomeration on cosine distance. Merges until
/// `num_speakers` clusters remain, or, without a count, while the closest
/// pair is within `threshold`. Returns cluster ids numbered by first
/// appearance.
pub fn agglomerative_cluster(embeddings: &[SpeakerEmbedding], num_speakers: Option<usize>, threshold: f64) -> Vec<usize> {
    let n = embeddings.len();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| cosine_distance(&embeddings[i].0, &embeddings[j].0)).collect())
        .collect();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let target = num_speakers.unwrap_or(1).max(1);
    while clusters.len() > target {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let sum: f64 = clusters[i].iter().flat_map(|&a| clusters[j].iter().map(move |&b| (a, b))).map(|(a, b)| dist[a][b]).sum();
                let d = sum / (clusters[i].len() * clusters[j].len()) as f64;
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (d, i, j) = best.expect("at least two clusters");
        if num_speakers.is_none() && d > threshold {
            break;
        }
        let merged = clusters.remove(j);
        clusters[i].extend(merged);
        clusters[i].sort_unstable();
    }
    // clusters stay ordered by their smallest member, which is first appearance
    clusters.sort_by_key(|c| c[0]);
    let mut labels = vec![0; n];
    for (id, members) in clusters.iter().enumerate() {
        for &m in members {
            labels[m] = id;
        }
    }
    labels
}

pub fn speaker_name(id: usize) -> String {
    format!("SPEAKER_{id:02}")
}

/// VAD, embedding and clustering; neighbouring segments of one speaker
/// separated by less than `min_gap_s` are merged.
pub fn diarize(clip: &AudioClip, cfg: &DiarizeConfig) -> Result<Vec<Segment>, DiarizeError> {
    let regions = vad_segments(clip, cfg)?;
    if regions.is_empty() {
        return Ok(vec![]);
    }
    let embeddings = regions
        .iter()
        .map(|&(s, e)| segment_embedding(clip, s, e, &cfg.frame))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = agglomerative_cluster(&embeddings, cfg.num_speakers, cfg.threshold);
    let mut out: Vec<Segment> = Vec::new();
    for (&(start, end), &label) in regions.iter().zip(&labels) {
        let speaker = speaker_name(label);
        match out.last_mut() {
            Some(prev) if prev.speaker == speaker && start - prev.end_s < cfg.min_gap_s => prev.end_s = end,
            _ => out.push(Segment::new(start, end, speaker)),
        }
    }
    Ok(out)
}

pub fn write_rttm(file_id: &str, segments: &[Segment]) -> String {
    let mut text = String::new();
    for s in segments {
        writeln!(
            text,
            "SPEAKER {file_id} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            s.start_s,
            s.duration(),
            s.speaker
        )
        .expect("writing to a String");
    }
    text
}

pub fn parse_rttm(text: &str) -> Result<Vec<Segment>, DiarizeError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let malformed = |reason: String| DiarizeError::MalformedRttm { line: idx + 1, reason };
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 10 {
            return Err(malformed(format!("expected 10 fields, found {}", fields.len())));
        }
        if fields[0] != "SPEAKER" {
            return Err(malformed(format!("unexpected record type {:?}", fields[0])));
        }
        let number = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite());
        let start = number(fields[3]).ok_or_else(|| malformed(format!("bad start {:?}", fields[3])))?;
        let dur = number(fields[4]).ok_or_else(|| malformed(format!("bad duration {:?}", fields[4])))?;
        if dur < 0.0 || start < 0.0 {
            return Err(malformed("negative time".into()));
        }
        out.push(Segment::new(start, start + dur, fields[7]));
    }
    Ok(out)
}

/// Best one-to-one assignment of reference to hypothesis speakers by
/// exhaustive search over `overlap[ref][hyp]`; `None` leaves a reference
/// speaker unmapped.
fn best_mapping(overlap: &[Vec<f64>], n_hyp: usize) -> Vec<Option<usize>> {
    fn go(r: usize, overlap: &[Vec<f64>], used: &mut [bool], current: &mut Vec<Option<usize>>, best: &mut (f64, Vec<Option<usize>>), score: f64) {
        if r == overlap.len() {
            if score > best.0 {
                *best = (score, current.clone());
            }
            return;
        }
        current.push(None);
        go(r + 1, overlap, used, current, best, score);
        current.pop();
        for h in 0..used.len() {
            if !used[h] {
                used[h] = true;
                current.push(Some(h));
                go(r + 1, overlap, used, current, best, score + overlap[r][h]);
                current.pop();
                used[h] = false;
            }
        }
    }
    let mut best = (-1.0, vec![]);
    go(0, overlap, &mut vec![false; n_hyp], &mut Vec::new(), &mut best, 0.0);
    best.1
}

/// Diarization error rate: missed, false-alarm and confused speaker time
/// over reference speech time, with `collar_s` around every reference
/// boundary left unscored and the optimal speaker mapping applied.
pub fn der(reference: &[Segment], hypothesis: &[Segment], collar_s: f64) -> Result<f64, DiarizeError> {
    let index = |segs: &[Segment]| {
        let mut ids = BTreeMap::new();
        for s in segs {
            let next = ids.len();
            ids.entry(s.speaker.clone()).or_insert(next);
        }
        ids
    };
    let ref_ids = index(reference);
    let hyp_ids = index(hypothesis);
    for ids in [&ref_ids, &hyp_ids] {
        if ids.len() > MAX_MAPPED_SPEAKERS {
            return Err(DiarizeError::TooManySpeakers(ids.len()));
        }
    }

    let mut cuts: Vec<f64> = Vec::new();
    for s in reference {
        cuts.extend([s.start_s, s.end_s, s.start_s - collar_s, s.start_s + collar_s, s.end_s - collar_s, s.end_s + collar_s]);
    }
    for s in hypothesis {
        cuts.extend([s.start_s, s.end_s]);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let in_collar = |t: f64| {
        collar_s > 0.0
            && reference.iter().any(|s| (t - s.start_s).abs() < collar_s || (t - s.end_s).abs() < collar_s)
    };
    let active = |segs: &[Segment], ids: &BTreeMap<String, usize>, t: f64| {
        let mut v: Vec<usize> = segs.iter().filter(|s| s.start_s <= t && t < s.end_s).map(|s| ids[&s.speaker]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };

    let mut scored: Vec<(f64, Vec<usize>, Vec<usize>)> = Vec::new();
    let mut overlap = vec![vec![0.0; hyp_ids.len()]; ref_ids.len()];
    let mut ref_time = 0.0;
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = 0.5 * (t0 + t1);
        if in_collar(mid) {
            continue;
        }
        let dur = t1 - t0;
        let r = active(reference, &ref_ids, mid);
        let h = active(hypothesis, &hyp_ids, mid);
        ref_time += r.len() as f64 * dur;
        for &ri in &r {
            for &hi in &h {
                overlap[ri][hi] += dur;
            }
        }
        scored.push((dur, r, h));
    }
    if ref_time <= 0.0 {
        return Err(DiarizeError::EmptyReference);
    }
    let mapping = best_mapping(&overlap, hyp_ids.len());
    let errors: f64 = scored
        .iter()
        .map(|(dur, r, h)| {
            let correct = r.iter().filter(|&&ri| mapping[ri].is_some_and(|m| h.contains(&m))).count();
            (r.len().max(h.len()) - correct) as f64 * dur
        })
        .sum();
    Ok(errors / ref_time)
}
