//! Independent reference implementations and signal fixtures shared by the
//! integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

pub mod grad;

use serpent_core::audio::AudioClip;
use serpent_core::rng::SplitMix64;

pub const SR: u32 = 22050;

/// Direct O(n^2) DFT of a real frame, bins `0..=n/2`, as `(re, im)`.
pub fn naive_dft(frame: &[f64]) -> Vec<(f64, f64)> {
    let n = frame.len();
    let cos: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                let idx = (k * t) % n;
                re += x * cos[idx];
                im -= x * sin[idx];
            }
            (re, im)
        })
        .collect()
}

pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| (PI * i as f64 / n as f64).sin().powi(2)).collect()
}

fn mel(f: f64) -> f64 {
    1127.0 * (f / 700.0).ln_1p()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * (m / 1127.0).exp_m1()
}

/// Filter `m` evaluated at `f` with explicit rising and falling edges.
pub fn triangle(f: f64, lo: f64, center: f64, hi: f64) -> f64 {
    if f <= lo || f >= hi {
        0.0
    } else if f <= center {
        (f - lo) / (center - lo)
    } else {
        (hi - f) / (hi - center)
    }
}

pub fn mel_edges(n_mels: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let (a, b) = (mel(f_min), mel(f_max));
    (0..n_mels + 2).map(|i| inv_mel(a + (b - a) * i as f64 / (n_mels + 1) as f64)).collect()
}

/// DCT-II with orthonormal scaling written as an explicit basis matrix.
pub fn textbook_dct(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len();
    (0..n_out)
        .map(|k| {
            let alpha = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            let mut acc = 0.0;
            for (i, xi) in x.iter().enumerate() {
                acc += xi * (PI / n as f64 * (i as f64 + 0.5) * k as f64).cos();
            }
            alpha * acc
        })
        .collect()
}

/// Reference MFCC frames for Hann-windowed, un-padded framing.
pub fn reference_mfcc(samples: &[f64], sr: u32, frame_len: usize, hop: usize, n_mels: usize, n_mfcc: usize) -> Vec<Vec<f64>> {
    let window = hann(frame_len);
    let edges = mel_edges(n_mels, 0.0, sr as f64 / 2.0);
    let bin_hz = sr as f64 / frame_len as f64;
    let n_frames = 1 + (samples.len() - frame_len) / hop;
    (0..n_frames)
        .map(|t| {
            let frame: Vec<f64> = samples[t * hop..t * hop + frame_len].iter().zip(&window).map(|(x, w)| x * w).collect();
            let power: Vec<f64> = naive_dft(&frame).iter().map(|(re, im)| re * re + im * im).collect();
            let log_mel: Vec<f64> = (0..n_mels)
                .map(|m| {
                    let e: f64 = power
                        .iter()
                        .enumerate()
                        .map(|(k, p)| p * triangle(k as f64 * bin_hz, edges[m], edges[m + 1], edges[m + 2]))
                        .sum();
                    (e + 1e-10).ln()
                })
                .collect();
            textbook_dct(&log_mel, n_mfcc)
        })
        .collect()
}

pub fn sine(freq: f64, amp: f64, secs: f64, sr: u32) -> Vec<f64> {
    let n = (secs * sr as f64).round() as usize;
    (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / sr as f64).sin()).collect()
}

/// Sum of harmonics `h * f0` with amplitudes `profile[h - 1]`.
pub fn harmonic_tone(f0: f64, profile: &[f64], secs: f64, sr: u32, phase: f64) -> Vec<f64> {
    let n = (secs * sr as f64).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            profile
                .iter()
                .enumerate()
                .map(|(h, a)| a * (2.0 * PI * f0 * (h + 1) as f64 * t + phase * (h + 1) as f64).sin())
                .sum()
        })
        .collect()
}

/// Random mixture of a few sinusoids and white noise in `[-1, 1]`.
pub fn random_clip(rng: &mut SplitMix64, secs: f64, sr: u32) -> AudioClip {
    let n = (secs * sr as f64).round() as usize;
    let parts: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (50.0 + rng.next_f64() * 8000.0, 0.05 + 0.25 * rng.next_f64(), 2.0 * PI * rng.next_f64()))
        .collect();
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            let tones: f64 = parts.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum();
            (tones + 0.05 * (2.0 * rng.next_f64() - 1.0)).clamp(-1.0, 1.0)
        })
        .collect();
    AudioClip::new(samples, sr).expect("samples in range")
}

/// Bin of the largest magnitude in a Hann-windowed DFT of `frame`.
pub fn peak_bin(frame: &[f64]) -> usize {
    let w = hann(frame.len());
    let windowed: Vec<f64> = frame.iter().zip(&w).map(|(x, w)| x * w).collect();
    let spec = naive_dft(&windowed);
    (1..spec.len())
        .max_by(|&a, &b| {
            let ma = spec[a].0.powi(2) + spec[a].1.powi(2);
            let mb = spec[b].0.powi(2) + spec[b].1.powi(2);
            ma.total_cmp(&mb)
        })
        .expect("non-empty spectrum")
}

/// Seven classes of harmonic tones with distinct fundamentals and
/// harmonic profiles; each clip jitters pitch, level and phase and adds
/// light noise.
pub fn tone_class_clip(class: usize, rng: &mut SplitMix64, secs: f64) -> AudioClip {
    const F0: [f64; 7] = [110.0, 165.0, 247.0, 370.0, 554.0, 831.0, 1245.0];
    const PROFILES: [[f64; 4]; 7] = [
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 0.5, 0.0, 0.0],
        [1.0, 0.0, 0.6, 0.0],
        [0.5, 1.0, 0.0, 0.3],
        [1.0, 0.3, 0.3, 0.3],
        [0.3, 0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, 0.8],
    ];
    let f0 = F0[class] * (1.0 + 0.03 * (2.0 * rng.next_f64() - 1.0));
    let level = 0.2 + 0.3 * rng.next_f64();
    let phase = 2.0 * PI * rng.next_f64();
    let norm: f64 = PROFILES[class].iter().sum();
    let tone = harmonic_tone(f0, &PROFILES[class], secs, SR, phase);
    let samples = tone
        .iter()
        .map(|x| (level * x / norm + 0.01 * rng.next_gaussian()).clamp(-1.0, 1.0))
        .collect();
    AudioClip::new(samples, SR).expect("samples in range")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}
