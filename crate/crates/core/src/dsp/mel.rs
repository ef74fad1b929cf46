use super::{stft, DspError, FrameConfig};
use crate::audio::AudioClip;

/// Floor added to mel energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the mel scale, peak-normalized (no area scaling).
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels` rows of `frame_len / 2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
    pub f_min: f64,
    pub f_max: f64,
    /// The `n_mels + 2` band edges in Hz; filter `m` spans
    /// `edges[m]..edges[m + 2]` and peaks at `edges[m + 1]`.
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    pub fn center_frequencies(&self) -> &[f64] {
        &self.edges_hz[1..self.edges_hz.len() - 1]
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub fn mel_filterbank(
    n_mels: usize,
    cfg: &FrameConfig,
    sample_rate_hz: u32,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank, DspError> {
    cfg.validate()?;
    let nyquist = sample_rate_hz as f64 / 2.0;
    if n_mels == 0 {
        return Err(DspError::InvalidBand("n_mels must be at least 1".into()));
    }
    if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
        return Err(DspError::InvalidBand(format!(
            "need 0 <= f_min ({f_min}) < f_max ({f_max}) <= {nyquist}"
        )));
    }
    let (mel_lo, mel_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let step = (mel_hi - mel_lo) / (n_mels + 1) as f64;
    let edges_hz: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect();

    let n_bins = cfg.frame_len / 2 + 1;
    let bin_hz = sample_rate_hz as f64 / cfg.frame_len as f64;
    let mut weights = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, center, hi) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        let row: Vec<f64> = (0..n_bins)
            .map(|k| {
                let f = k as f64 * bin_hz;
                let rising = (f - lo) / (center - lo);
                let falling = (hi - f) / (hi - center);
                rising.min(falling).max(0.0)
            })
            .collect();
        if row.iter().all(|&w| w == 0.0) {
            return Err(DspError::InvalidBand(format!(
                "filter {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin"
            )));
        }
        weights.push(row);
    }
    Ok(MelFilterbank { weights, f_min, f_max, edges_hz })
}

/// Orthonormal DCT-II, keeping the first `n_out` coefficients.
pub fn dct_ii_ortho(input: &[f64], n_out: usize) -> Vec<f64> {
    let n = input.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    x * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()
                })
                .sum();
            scale * sum
        })
        .collect()
}

/// Per-frame MFCCs: power spectrum, mel filterbank over `[0, Nyquist]`,
/// `ln(x + 1e-10)`, orthonormal DCT-II. Returns `num_frames` rows of
/// `n_mfcc` coefficients.
pub fn mfcc(
    clip: &AudioClip,
    cfg: &FrameConfig,
    n_mels: usize,
    n_mfcc: usize,
) -> Result<Vec<Vec<f64>>, DspError> {
    if n_mfcc > n_mels {
        return Err(DspError::InvalidBand(format!("n_mfcc {n_mfcc} exceeds n_mels {n_mels}")));
    }
    let nyquist = clip.sample_rate_hz() as f64 / 2.0;
    let bank = mel_filterbank(n_mels, cfg, clip.sample_rate_hz(), 0.0, nyquist)?;
    let spec = stft(clip, cfg)?;
    Ok((0..spec.num_frames())
        .map(|i| {
            let log_mel: Vec<f64> = bank
                .apply(&spec.power(i))
                .into_iter()
                .map(|e| (e + LOG_FLOOR).ln())
                .collect();
            dct_ii_ortho(&log_mel, n_mfcc)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_roundtrip() {
        for hz in [0.0, 100.0, 700.0, 4000.0, 11025.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn single_filter_peaks_mid_mel() {
        let cfg = FrameConfig::default();
        let bank = mel_filterbank(1, &cfg, 22050, 0.0, 11025.0).unwrap();
        let center = bank.center_frequencies()[0];
        assert!((center - mel_to_hz(hz_to_mel(11025.0) / 2.0)).abs() < 1e-9);
        let row = &bank.weights[0];
        let peak = row.iter().cloned().enumerate().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let bin_hz = 22050.0 / 2048.0;
        assert!((peak.0 as f64 * bin_hz - center).abs() <= bin_hz);
        // unimodal: non-decreasing then non-increasing
        let rising = row[..=peak.0].windows(2).all(|w| w[0] <= w[1]);
        let falling = row[peak.0..].windows(2).all(|w| w[0] >= w[1]);
        assert!(rising && falling);
        assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
    }

    #[test]
    fn centers_increase() {
        let bank = mel_filterbank(40, &FrameConfig::default(), 22050, 0.0, 11025.0).unwrap();
        assert!(bank.center_frequencies().windows(2).all(|w| w[0] < w[1]));
        assert!(bank.weights.iter().all(|r| r.iter().any(|&w| w > 0.0)));
    }

    #[test]
    fn invalid_bands() {
        let cfg = FrameConfig::default();
        assert!(mel_filterbank(0, &cfg, 22050, 0.0, 11025.0).is_err());
        assert!(mel_filterbank(10, &cfg, 22050, 500.0, 500.0).is_err());
        assert!(mel_filterbank(10, &cfg, 22050, 0.0, 12000.0).is_err());
        // far more filters than bins below 100 Hz
        assert!(mel_filterbank(200, &cfg, 22050, 0.0, 100.0).is_err());
    }

    #[test]
    fn dct_of_constant() {
        let out = dct_ii_ortho(&[2.0; 40], 20);
        assert!((out[0] - 2.0 * 40f64.sqrt()).abs() < 1e-12);
        assert!(out[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn silence_mfcc() {
        let clip = AudioClip::silence(4096, 22050);
        let m = mfcc(&clip, &FrameConfig::default(), 40, 20).unwrap();
        assert_eq!(m.len(), 5);
        for row in m {
            assert!((row[0] - LOG_FLOOR.ln() * 40f64.sqrt()).abs() < 1e-9);
            assert!(row[1..].iter().all(|c| c.abs() < 1e-9));
        }
    }
}
