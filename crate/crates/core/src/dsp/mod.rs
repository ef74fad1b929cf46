//! Frame-based signal analysis: STFT, mel filterbank, MFCC, zero-crossing
//! rate, RMS and the 22-value clip descriptor.

mod features;
mod mel;
mod stft;

pub use features::{extract_features, FeatureVector, FEATURE_LEN};
pub use mel::{dct_ii_ortho, hz_to_mel, mel_filterbank, mel_to_hz, mfcc, MelFilterbank, LOG_FLOOR};
pub use stft::{stft, FrameTransform, Spectrogram};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("clip has {len} samples, fewer than one {frame_len}-sample frame")]
    ClipTooShort { len: usize, frame_len: usize },
    #[error("invalid mel band: {0}")]
    InvalidBand(String),
    #[error("invalid frame config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window coefficients of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub frame_len: usize,
    pub hop_len: usize,
    pub window: Window,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self { frame_len: 2048, hop_len: 512, window: Window::Hann }
    }
}

impl FrameConfig {
    pub fn new(frame_len: usize, hop_len: usize, window: Window) -> Result<Self, DspError> {
        let cfg = Self { frame_len, hop_len, window };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DspError> {
        if !self.frame_len.is_power_of_two() {
            return Err(DspError::InvalidConfig(format!(
                "frame_len {} is not a power of two",
                self.frame_len
            )));
        }
        if self.hop_len == 0 || self.hop_len > self.frame_len {
            return Err(DspError::InvalidConfig(format!(
                "hop_len {} must be in 1..={}",
                self.hop_len, self.frame_len
            )));
        }
        Ok(())
    }

    /// Un-padded frame count: `1 + (len - frame_len) / hop_len`.
    pub fn num_frames(&self, len: usize) -> Result<usize, DspError> {
        self.validate()?;
        if len < self.frame_len {
            return Err(DspError::ClipTooShort { len, frame_len: self.frame_len });
        }
        Ok(1 + (len - self.frame_len) / self.hop_len)
    }

    pub fn frames<'a>(&self, samples: &'a [f64]) -> Result<impl Iterator<Item = &'a [f64]> + 'a, DspError> {
        let n = self.num_frames(samples.len())?;
        let (frame_len, hop) = (self.frame_len, self.hop_len);
        Ok((0..n).map(move |i| &samples[i * hop..i * hop + frame_len]))
    }
}

/// Per-frame zero-crossing rate: sign changes between adjacent samples
/// divided by the frame length. Zero counts as positive.
pub fn zcr(clip: &AudioClip, cfg: &FrameConfig) -> Result<Vec<f64>, DspError> {
    let len = cfg.frame_len as f64;
    Ok(cfg
        .frames(clip.samples())?
        .map(|frame| {
            let crossings = frame
                .windows(2)
                .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
                .count();
            crossings as f64 / len
        })
        .collect())
}

/// Per-frame root mean square.
pub fn rms(clip: &AudioClip, cfg: &FrameConfig) -> Result<Vec<f64>, DspError> {
    Ok(cfg
        .frames(clip.samples())?
        .map(|frame| (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 22050).unwrap()
    }

    #[test]
    fn frame_config_validation() {
        assert!(FrameConfig::new(1000, 100, Window::Hann).is_err());
        assert!(FrameConfig::new(1024, 0, Window::Hann).is_err());
        assert!(FrameConfig::new(1024, 2048, Window::Hann).is_err());
        let cfg = FrameConfig::default();
        assert_eq!(cfg.num_frames(2048).unwrap(), 1);
        assert_eq!(cfg.num_frames(2048 + 1023).unwrap(), 2);
        assert_eq!(
            cfg.num_frames(100),
            Err(DspError::ClipTooShort { len: 100, frame_len: 2048 })
        );
    }

    #[test]
    fn zcr_constant_and_alternating() {
        let cfg = FrameConfig::default();
        assert!(zcr(&clip(vec![0.5; 4096]), &cfg).unwrap().iter().all(|&r| r == 0.0));
        let alt: Vec<f64> = (0..4096).map(|i| if i % 2 == 0 { 0.3 } else { -0.3 }).collect();
        for r in zcr(&clip(alt), &cfg).unwrap() {
            assert_eq!(r, 2047.0 / 2048.0);
        }
        // zero is positive: only 0.1 -> -0.1 and -0.1 -> 0.0 cross
        let zeros = clip([0.0, 0.1, -0.1, 0.0].repeat(512));
        assert_eq!(zcr(&zeros, &cfg).unwrap()[0], 0.5);
    }

    #[test]
    fn rms_cases() {
        let cfg = FrameConfig::default();
        assert!(rms(&clip(vec![0.0; 4096]), &cfg).unwrap().iter().all(|&r| r == 0.0));
        for r in rms(&clip(vec![-0.25; 4096]), &cfg).unwrap() {
            assert!((r - 0.25).abs() < 1e-15);
        }
        // 2048-sample frames holding exactly 32 cycles
        let sine: Vec<f64> = (0..8192)
            .map(|i| (2.0 * std::f64::consts::PI * 32.0 * i as f64 / 2048.0).sin())
            .collect();
        for r in rms(&clip(sine), &cfg).unwrap() {
            assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
        }
        assert!(rms(&clip(vec![0.0; 10]), &cfg).is_err());
    }
}
