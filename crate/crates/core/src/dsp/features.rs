use super::{mfcc, rms, zcr, DspError, FrameConfig};
use crate::audio::AudioClip;

pub const FEATURE_LEN: usize = 22;
const N_MELS: usize = 40;
const N_MFCC: usize = 20;

/// Clip descriptor laid out as `[zcr_mean, rms_mean, mfcc_mean[0..20]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn zcr_mean(&self) -> f64 {
        self.0[0]
    }

    pub fn rms_mean(&self) -> f64 {
        self.0[1]
    }

    pub fn mfcc_means(&self) -> &[f64] {
        &self.0[2..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<&[f64]> for FeatureVector {
    type Error = DspError;

    fn try_from(values: &[f64]) -> Result<Self, Self::Error> {
        let arr: [f64; FEATURE_LEN] = values.try_into().map_err(|_| {
            DspError::InvalidConfig(format!("feature vector needs {FEATURE_LEN} values, got {}", values.len()))
        })?;
        Ok(Self(arr))
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

/// Mean-pools per-frame ZCR, RMS and 20 MFCCs into one 22-value vector.
pub fn extract_features(clip: &AudioClip, cfg: &FrameConfig) -> Result<FeatureVector, DspError> {
    let zcr_frames = zcr(clip, cfg)?;
    let rms_frames = rms(clip, cfg)?;
    let mfcc_frames = mfcc(clip, cfg, N_MELS, N_MFCC)?;

    let mut values = [0.0; FEATURE_LEN];
    values[0] = mean(zcr_frames.into_iter());
    values[1] = mean(rms_frames.into_iter());
    for (c, slot) in values[2..].iter_mut().enumerate() {
        *slot = mean(mfcc_frames.iter().map(|row| row[c]));
    }
    Ok(FeatureVector(values))
}
