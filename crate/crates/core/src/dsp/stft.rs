use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{DspError, FrameConfig, Window};
use crate::audio::AudioClip;

/// Windowed real FFT of fixed length, and its unwindowed inverse.
#[derive(Clone)]
pub struct FrameTransform {
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FrameTransform {
    pub fn new(frame_len: usize, window: Window) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            window: window.coefficients(frame_len),
            forward: planner.plan_fft_forward(frame_len),
            inverse: planner.plan_fft_inverse(frame_len),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.window.len()
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// One-sided spectrum (`frame_len / 2 + 1` bins) of the windowed frame.
    pub fn forward(&self, frame: &[f64]) -> Vec<Complex64> {
        let n = self.frame_len();
        assert_eq!(frame.len(), n, "frame length mismatch");
        let mut buf: Vec<Complex64> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex64::new(x * w, 0.0))
            .collect();
        self.forward.process(&mut buf);
        buf.truncate(n / 2 + 1);
        buf
    }

    /// Real inverse of a one-sided spectrum, scaled by `1 / frame_len`.
    /// The window is not applied.
    pub fn inverse(&self, half: &[Complex64]) -> Vec<f64> {
        let n = self.frame_len();
        assert_eq!(half.len(), n / 2 + 1, "spectrum length mismatch");
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..half.len()].copy_from_slice(half);
        for k in 1..n - half.len() + 1 {
            buf[n - k] = half[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub bins: Vec<Vec<Complex64>>,
    pub frame_config: FrameConfig,
    pub sample_rate_hz: u32,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.bins.len()
    }

    pub fn num_bins(&self) -> usize {
        self.frame_config.frame_len / 2 + 1
    }

    pub fn power(&self, frame: usize) -> Vec<f64> {
        self.bins[frame].iter().map(|c| c.norm_sqr()).collect()
    }

    /// Frame energy recovered from the one-sided spectrum via Parseval.
    pub fn spectral_energy(&self, frame: usize) -> f64 {
        let n = self.frame_config.frame_len;
        let row = &self.bins[frame];
        let interior: f64 = row[1..n / 2].iter().map(|c| c.norm_sqr()).sum();
        (row[0].norm_sqr() + row[n / 2].norm_sqr() + 2.0 * interior) / n as f64
    }
}

/// Short-time Fourier transform without edge padding.
pub fn stft(clip: &AudioClip, cfg: &FrameConfig) -> Result<Spectrogram, DspError> {
    let transform = FrameTransform::new(cfg.frame_len, cfg.window);
    let bins = cfg.frames(clip.samples())?.map(|f| transform.forward(f)).collect();
    Ok(Spectrogram { bins, frame_config: *cfg, sample_rate_hz: clip.sample_rate_hz() })
}
