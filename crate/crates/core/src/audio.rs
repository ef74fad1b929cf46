//! Decoding, encoding, resampling and cropping of mono audio clips.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed RIFF/WAVE container: {0}")]
    MalformedContainer(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio contains no sample frames")]
    EmptyAudio,
    #[error("crop offset {offset_s}s is past the end of a {duration_s}s clip")]
    OffsetPastEnd { offset_s: f64, duration_s: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono sample buffer with its sample rate. Samples always lie in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting out-of-range or non-finite samples.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(AudioError::InvalidArgument(format!(
                "sample {bad} outside [-1, 1]"
            )));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    /// Builds a clip, clamping samples into `[-1, 1]` (NaN becomes 0).
    pub fn clamped(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        assert!(sample_rate_hz > 0, "sample rate must be positive");
        let samples = samples
            .into_iter()
            .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
            .collect();
        Self { samples, sample_rate_hz }
    }

    pub fn silence(len: usize, sample_rate_hz: u32) -> Self {
        Self::clamped(vec![0.0; len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedContainer("fmt chunk shorter than 16 bytes".into()));
    }
    Ok(FmtChunk {
        format: read_u16(body, 0),
        channels: read_u16(body, 2),
        sample_rate: read_u32(body, 4),
        block_align: read_u16(body, 12),
        bits: read_u16(body, 14),
    })
}

/// Decodes a RIFF/WAVE byte stream (PCM-16/24/32 or float-32, mono or
/// stereo) into a mono clip. Stereo is averaged sample-wise.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedContainer("missing RIFF/WAVE magic".into()));
    }
    let mut fmt = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| {
                AudioError::MalformedContainer(format!(
                    "chunk {:?} declares {size} bytes past end of file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[body_start..body_end])?),
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| AudioError::MalformedContainer("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedContainer("no data chunk".into()))?;

    if fmt.format == FORMAT_EXTENSIBLE {
        return Err(AudioError::UnsupportedEncoding("WAVE_FORMAT_EXTENSIBLE".into()));
    }
    let decode_sample: fn(&[u8]) -> f64 = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => |b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32_768.0,
        (FORMAT_PCM, 24) => |b| {
            // Sign-extend by placing the 3 bytes in the top of an i32.
            (i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8) as f64 / 8_388_608.0
        },
        (FORMAT_PCM, 32) => |b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
        (FORMAT_FLOAT, 32) => |b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (format, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "format tag {format} with {bits} bits per sample"
            )))
        }
    };
    if fmt.channels != 1 && fmt.channels != 2 {
        return Err(AudioError::UnsupportedEncoding(format!("{} channels", fmt.channels)));
    }
    if fmt.sample_rate == 0 {
        return Err(AudioError::MalformedContainer("sample rate is zero".into()));
    }
    let sample_bytes = fmt.bits as usize / 8;
    let frame_bytes = sample_bytes * fmt.channels as usize;
    if fmt.block_align as usize != frame_bytes {
        return Err(AudioError::MalformedContainer(format!(
            "block align {} does not match {frame_bytes}",
            fmt.block_align
        )));
    }
    let frames = data.len() / frame_bytes;
    if frames == 0 {
        return Err(AudioError::EmptyAudio);
    }
    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame.chunks_exact(sample_bytes).map(decode_sample).sum();
            sum / fmt.channels as f64
        })
        .collect();
    Ok(AudioClip::clamped(samples, fmt.sample_rate))
}

/// Encodes a clip as a PCM-16 mono little-endian WAV.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let q = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    decode_wav(&std::fs::read(path)?)
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    std::fs::write(path, encode_wav(clip))?;
    Ok(())
}

/// Linear interpolation of `samples` at positions `j * step` for
/// `j in 0..out_len`. Positions past the last sample hold the last value.
pub(crate) fn interpolate_at_step(samples: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    if samples.is_empty() {
        return vec![0.0; out_len];
    }
    let last = samples.len() - 1;
    (0..out_len)
        .map(|j| {
            let pos = j as f64 * step;
            let i0 = pos.floor() as usize;
            if i0 >= last {
                return samples[last];
            }
            let frac = pos - i0 as f64;
            samples[i0] * (1.0 - frac) + samples[i0 + 1] * frac
        })
        .collect()
}

/// Resamples by linear interpolation. Output length is
/// `round(len * target / source)`.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip, AudioError> {
    if target_rate_hz == 0 {
        return Err(AudioError::InvalidArgument("target rate must be positive".into()));
    }
    if target_rate_hz == clip.sample_rate_hz {
        return Ok(clip.clone());
    }
    let ratio = target_rate_hz as f64 / clip.sample_rate_hz as f64;
    let out_len = (clip.len() as f64 * ratio).round() as usize;
    let out = interpolate_at_step(&clip.samples, 1.0 / ratio, out_len);
    Ok(AudioClip::clamped(out, target_rate_hz))
}

/// Extracts `[offset_s, offset_s + duration_s)`. With `pad_to_duration` a
/// short tail is zero padded to the full duration.
pub fn crop(
    clip: &AudioClip,
    offset_s: f64,
    duration_s: f64,
    pad_to_duration: bool,
) -> Result<AudioClip, AudioError> {
    if !(offset_s >= 0.0) || !offset_s.is_finite() {
        return Err(AudioError::InvalidArgument(format!("offset {offset_s} must be >= 0")));
    }
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(AudioError::InvalidArgument(format!("duration {duration_s} must be > 0")));
    }
    let rate = clip.sample_rate_hz as f64;
    let start = (offset_s * rate).round() as usize;
    let want = (duration_s * rate).round() as usize;
    if start >= clip.len() && !pad_to_duration {
        return Err(AudioError::OffsetPastEnd {
            offset_s,
            duration_s: clip.duration_seconds(),
        });
    }
    let start = start.min(clip.len());
    let end = start.saturating_add(want).min(clip.len());
    let mut samples = clip.samples[start..end].to_vec();
    if pad_to_duration {
        samples.resize(want, 0.0);
    }
    Ok(AudioClip { samples, sample_rate_hz: clip.sample_rate_hz })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_wav(channels: u16, rate: u32, interleaved: &[i16]) -> Vec<u8> {
        let data_len = interleaved.len() * 2;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        for s in interleaved {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    #[test]
    fn decode_pcm16_mono() {
        let clip = decode_wav(&pcm16_wav(1, 8000, &[0, 16384, -16384, 32767])).unwrap();
        assert_eq!(clip.sample_rate_hz(), 8000);
        let expected = [0.0, 0.5, -0.5, 32767.0 / 32768.0];
        for (a, b) in clip.samples().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_stereo_averages() {
        let clip = decode_wav(&pcm16_wav(2, 8000, &[32767, -32767, 0, 0])).unwrap();
        assert_eq!(clip.len(), 2);
        for s in clip.samples() {
            assert!(s.abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn decode_pcm24_and_float() {
        // 24-bit: -4194304 = 0xC00000 -> -0.5
        let mut bytes = pcm16_wav(1, 16000, &[]);
        // patch fmt to 24-bit, block align 3
        bytes[32..34].copy_from_slice(&3u16.to_le_bytes());
        bytes[34..36].copy_from_slice(&24u16.to_le_bytes());
        bytes[40..44].copy_from_slice(&6u32.to_le_bytes());
        bytes.extend_from_slice(&[0x00, 0x00, 0xC0, 0x00, 0x00, 0x40]);
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.samples(), &[-0.5, 0.5]);

        let mut bytes = pcm16_wav(1, 16000, &[]);
        bytes[20..22].copy_from_slice(&3u16.to_le_bytes());
        bytes[32..34].copy_from_slice(&4u16.to_le_bytes());
        bytes[34..36].copy_from_slice(&32u16.to_le_bytes());
        bytes[40..44].copy_from_slice(&8u32.to_le_bytes());
        bytes.extend_from_slice(&0.25f32.to_le_bytes());
        bytes.extend_from_slice(&2.0f32.to_le_bytes());
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.samples(), &[0.25, 1.0]);
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(decode_wav(b"nonsense"), Err(AudioError::MalformedContainer(_))));
        assert!(matches!(decode_wav(&pcm16_wav(1, 8000, &[])), Err(AudioError::EmptyAudio)));
        let mut ext = pcm16_wav(1, 8000, &[1, 2]);
        ext[20..22].copy_from_slice(&FORMAT_EXTENSIBLE.to_le_bytes());
        assert!(matches!(decode_wav(&ext), Err(AudioError::UnsupportedEncoding(_))));
        let mut truncated = pcm16_wav(1, 8000, &[1, 2]);
        truncated.truncate(truncated.len() - 1);
        assert!(matches!(decode_wav(&truncated), Err(AudioError::MalformedContainer(_))));
        let three_ch = pcm16_wav(3, 8000, &[1, 2, 3]);
        assert!(decode_wav(&three_ch).is_err());
    }

    #[test]
    fn encode_roundtrip_exact_on_grid() {
        let clip = AudioClip::new(vec![0.0, 0.5, -0.5, -1.0], 8000).unwrap();
        assert_eq!(decode_wav(&encode_wav(&clip)).unwrap(), clip);
    }

    #[test]
    fn resample_cases() {
        let clip = AudioClip::new(vec![0.1, 0.2, 0.3], 22050).unwrap();
        assert_eq!(resample(&clip, 22050).unwrap(), clip);

        let clip = AudioClip::new(vec![0.0, 1.0, 0.0, -1.0], 4000).unwrap();
        let out = resample(&clip, 2000).unwrap();
        assert_eq!(out.samples(), &[0.0, 0.0]);
        assert_eq!(out.sample_rate_hz(), 2000);
        assert!(resample(&clip, 0).is_err());
    }

    #[test]
    fn crop_cases() {
        let clip = AudioClip::new((0..4000).map(|i| i as f64 / 4000.0).collect(), 1000).unwrap();
        let c = crop(&clip, 0.6, 2.5, false).unwrap();
        assert_eq!(c.len(), 2500);
        assert_eq!(c.samples()[0], clip.samples()[600]);

        let one = AudioClip::new(vec![0.25; 1000], 1000).unwrap();
        assert_eq!(crop(&one, 0.0, 1.0, false).unwrap(), one);

        let two = AudioClip::new(vec![0.5; 2000], 1000).unwrap();
        let padded = crop(&two, 0.6, 2.5, true).unwrap();
        assert_eq!(padded.len(), 2500);
        assert!(padded.samples()[..1400].iter().all(|&s| s == 0.5));
        assert!(padded.samples()[1400..].iter().all(|&s| s == 0.0));
        assert_eq!(crop(&two, 0.6, 2.5, false).unwrap().len(), 1400);

        assert!(matches!(crop(&two, 2.0, 1.0, false), Err(AudioError::OffsetPastEnd { .. })));
        assert!(crop(&two, -1.0, 1.0, false).is_err());
        assert!(crop(&two, 0.0, 0.0, false).is_err());
    }

    #[test]
    fn clip_rejects_out_of_range() {
        assert!(AudioClip::new(vec![1.5], 8000).is_err());
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert_eq!(AudioClip::clamped(vec![2.0, -3.0, f64::NAN], 10).samples(), &[1.0, -1.0, 0.0]);
    }
}
