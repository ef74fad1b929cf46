//! Waveform augmentation: noise injection, time shift, phase-vocoder time
//! stretch and pitch shift, plus the three-variant expansion policy.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{interpolate_at_step, AudioClip};
use crate::dsp::{FrameTransform, Window};
use crate::rng::SplitMix64;

const VOCODER_FRAME: usize = 2048;
const VOCODER_HOP: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("stretch rate {0} outside [0.25, 4.0]")]
    RateOutOfRange(f64),
    #[error("pitch shift of {0} semitones exceeds +/-12")]
    SemitonesOutOfRange(f64),
    #[error("cannot augment an empty clip")]
    EmptyClip,
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub noise_coeff: f64,
    /// Maximum shift as a fraction of the clip length.
    pub shift_fraction: f64,
    pub stretch_rate: f64,
    pub pitch_semitones: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            noise_coeff: 0.035,
            shift_fraction: 0.05,
            stretch_rate: 0.8,
            pitch_semitones: 2.0,
            rng_seed: 42,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(self.noise_coeff >= 0.0) {
            return Err(AugmentError::InvalidConfig(format!("noise_coeff {} < 0", self.noise_coeff)));
        }
        if !(0.0..=1.0).contains(&self.shift_fraction) {
            return Err(AugmentError::InvalidConfig(format!(
                "shift_fraction {} outside [0, 1]",
                self.shift_fraction
            )));
        }
        if !(self.stretch_rate > 0.0) {
            return Err(AugmentError::InvalidConfig(format!("stretch_rate {} <= 0", self.stretch_rate)));
        }
        Ok(())
    }
}

fn non_empty(clip: &AudioClip) -> Result<(), AugmentError> {
    if clip.is_empty() {
        Err(AugmentError::EmptyClip)
    } else {
        Ok(())
    }
}

/// Adds Gaussian noise with amplitude `noise_coeff * U * max|x|`,
/// `U ~ Uniform(0, 1)`. The first draw of the stream is `U`, then one
/// standard normal per sample.
pub fn add_noise(clip: &AudioClip, cfg: &AugmentConfig, stream_id: u64) -> Result<AudioClip, AugmentError> {
    non_empty(clip)?;
    let mut rng = SplitMix64::for_stream(cfg.rng_seed, stream_id);
    let amplitude = cfg.noise_coeff * rng.next_f64() * clip.peak();
    if amplitude == 0.0 {
        return Ok(clip.clone());
    }
    let noisy = clip
        .samples()
        .iter()
        .map(|x| x + amplitude * rng.next_gaussian())
        .collect();
    Ok(AudioClip::clamped(noisy, clip.sample_rate_hz()))
}

/// Shifts by `k` samples: positive delays (zeros prepended, tail dropped),
/// negative advances (head dropped, zeros appended). Length is unchanged.
pub fn shift_by(clip: &AudioClip, k: i64) -> AudioClip {
    let n = clip.len();
    let x = clip.samples();
    let out = (0..n as i64)
        .map(|i| {
            let src = i - k;
            if (0..n as i64).contains(&src) {
                x[src as usize]
            } else {
                0.0
            }
        })
        .collect();
    AudioClip::clamped(out, clip.sample_rate_hz())
}

/// Random shift `k ~ Uniform{-S..=S}` with `S = round(shift_fraction * len)`.
pub fn time_shift(clip: &AudioClip, cfg: &AugmentConfig, stream_id: u64) -> Result<AudioClip, AugmentError> {
    non_empty(clip)?;
    let max_shift = (cfg.shift_fraction * clip.len() as f64).round() as i64;
    if max_shift == 0 {
        return Ok(clip.clone());
    }
    let mut rng = SplitMix64::for_stream(cfg.rng_seed, stream_id);
    let k = rng.next_below(2 * max_shift as u64 + 1) as i64 - max_shift;
    Ok(shift_by(clip, k))
}

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * (p / (2.0 * PI)).round()
}

/// Phase-vocoder time stretch. `rate > 1` shortens, `rate < 1` lengthens;
/// output length is `round(len / rate)` and pitch is preserved.
pub fn time_stretch(clip: &AudioClip, rate: f64) -> Result<AudioClip, AugmentError> {
    if !(0.25..=4.0).contains(&rate) {
        return Err(AugmentError::RateOutOfRange(rate));
    }
    non_empty(clip)?;
    let out = phase_vocoder(clip.samples(), rate);
    Ok(AudioClip::clamped(out, clip.sample_rate_hz()))
}

fn phase_vocoder(samples: &[f64], rate: f64) -> Vec<f64> {
    let (n_fft, hop) = (VOCODER_FRAME, VOCODER_HOP);
    let half = n_fft / 2;
    let transform = FrameTransform::new(n_fft, Window::Hann);

    // Centered analysis frames over a zero-padded copy.
    let mut padded = vec![0.0; samples.len() + n_fft];
    padded[half..half + samples.len()].copy_from_slice(samples);
    let n_frames = 1 + samples.len() / hop;
    padded.resize((n_frames - 1) * hop + n_fft, 0.0);
    let frames: Vec<Vec<Complex64>> = (0..n_frames)
        .map(|t| transform.forward(&padded[t * hop..t * hop + n_fft]))
        .collect();

    let n_bins = half + 1;
    let expected: Vec<f64> = (0..n_bins).map(|k| 2.0 * PI * hop as f64 * k as f64 / n_fft as f64).collect();
    let zero = vec![Complex64::new(0.0, 0.0); n_bins];
    let frame_at = |t: usize| frames.get(t).unwrap_or(&zero);

    let n_out = (n_frames as f64 / rate).ceil() as usize;
    let mut phase: Vec<f64> = frames[0].iter().map(|c| c.arg()).collect();
    let target_len = (samples.len() as f64 / rate).round() as usize;
    let buf_len = ((n_out - 1) * hop + n_fft).max(target_len + half);
    let mut out = vec![0.0; buf_len];
    let mut norm = vec![0.0; buf_len];
    let window = transform.window();

    for j in 0..n_out {
        let step = j as f64 * rate;
        let t0 = step.floor() as usize;
        let alpha = step - t0 as f64;
        let (cur, next) = (frame_at(t0), frame_at(t0 + 1));
        let synth: Vec<Complex64> = (0..n_bins)
            .map(|k| {
                let mag = (1.0 - alpha) * cur[k].norm() + alpha * next[k].norm();
                Complex64::from_polar(mag, phase[k])
            })
            .collect();
        for k in 0..n_bins {
            let delta = next[k].arg() - cur[k].arg() - expected[k];
            phase[k] += wrap_phase(delta) + expected[k];
        }
        let frame = transform.inverse(&synth);
        let start = j * hop;
        for i in 0..n_fft {
            out[start + i] += window[i] * frame[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    for (y, w) in out.iter_mut().zip(&norm) {
        if *w > 1e-10 {
            *y /= w;
        }
    }
    let mut result = out[half..].to_vec();
    result.resize(target_len, 0.0);
    result
}

/// Pitch shift by `semitones`: stretch by `1 / f` then resample by
/// `f = 2^(semitones / 12)`. Output length equals input length.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip, AugmentError> {
    if !(semitones.abs() <= 12.0) {
        return Err(AugmentError::SemitonesOutOfRange(semitones));
    }
    non_empty(clip)?;
    let factor = 2f64.powf(semitones / 12.0);
    let stretched = phase_vocoder(clip.samples(), 1.0 / factor);
    let out = interpolate_at_step(&stretched, factor, clip.len());
    Ok(AudioClip::clamped(out, clip.sample_rate_hz()))
}

/// `[original, noisy, pitch-shifted]` for one corpus clip.
pub fn augment_set(clip: &AudioClip, cfg: &AugmentConfig, stream_id: u64) -> Result<Vec<AudioClip>, AugmentError> {
    cfg.validate()?;
    non_empty(clip)?;
    Ok(vec![
        clip.clone(),
        add_noise(clip, cfg, stream_id)?,
        pitch_shift(clip, cfg.pitch_semitones)?,
    ])
}
