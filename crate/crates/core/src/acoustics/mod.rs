//! Spectrograms, decibel intensity profiles, and vocal loudness
//! classification.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error)]
pub enum AcousticsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub const DEFAULT_FRAME_SIZE: usize = 2048;
pub const DEFAULT_HOP: usize = 512;
/// Reference amplitude placing conversational recordings inside the
/// 20–70 dB comparator band.
pub const DEFAULT_P_REF: f64 = 1e-4;
/// Floor applied to decibel conversions so silence stays finite.
pub const DB_FLOOR: f64 = -100.0;
const AMP_EPS: f64 = 1e-10;

/// One-sided magnitude spectrogram, `magnitudes[bin][frame]`, Hann
/// window, frames hopped from sample 0 with the final frames zero-padded.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub magnitudes: Vec<Vec<f64>>,
    pub frame_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    pub fn n_frames(&self) -> usize {
        self.magnitudes.first().map_or(0, Vec::len)
    }

    /// Center frequency of a bin in Hz.
    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.frame_size as f64
    }
}

fn hann(frame_size: usize) -> Vec<f64> {
    (0..frame_size)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / frame_size as f64).cos())
        .collect()
}

fn frame_count(len: usize, hop: usize) -> usize {
    len.div_ceil(hop)
}

fn check_framing(frame_size: usize, hop: usize) -> Result<(), AcousticsError> {
    if frame_size == 0 || hop == 0 {
        return Err(AcousticsError::InvalidParams("frame_size and hop must be positive".into()));
    }
    if !frame_size.is_power_of_two() {
        return Err(AcousticsError::InvalidParams(format!(
            "frame_size {frame_size} is not a power of two"
        )));
    }
    if hop > frame_size {
        return Err(AcousticsError::InvalidParams(format!(
            "hop {hop} exceeds frame_size {frame_size}"
        )));
    }
    Ok(())
}

/// Short-time Fourier transform magnitude matrix.
pub fn stft(clip: &AudioClip, frame_size: usize, hop: usize) -> Result<Spectrogram, AcousticsError> {
    check_framing(frame_size, hop)?;
    if clip.samples.is_empty() {
        return Err(AcousticsError::InvalidParams("empty clip".into()));
    }
    let window = hann(frame_size);
    let n_frames = frame_count(clip.samples.len(), hop);
    let n_bins = frame_size / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame_size);

    let mut magnitudes = vec![vec![0.0f64; n_frames]; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); frame_size];
    for t in 0..n_frames {
        let start = t * hop;
        for (n, slot) in buf.iter_mut().enumerate() {
            let sample = clip.samples.get(start + n).copied().unwrap_or(0.0) as f64;
            *slot = Complex::new(sample * window[n], 0.0);
        }
        fft.process(&mut buf);
        for (k, row) in magnitudes.iter_mut().enumerate() {
            row[t] = buf[k].norm();
        }
    }
    Ok(Spectrogram {
        magnitudes,
        frame_size,
        hop,
        sample_rate: clip.sample_rate,
    })
}

/// `20·log10(max(amplitude, ε)/p_ref)`, floored at −100 dB.
pub fn amplitude_to_db(amplitude: f64, p_ref: f64) -> Result<f64, AcousticsError> {
    if p_ref <= 0.0 || !p_ref.is_finite() {
        return Err(AcousticsError::InvalidParams(format!("p_ref {p_ref}")));
    }
    if amplitude < 0.0 || !amplitude.is_finite() {
        return Err(AcousticsError::InvalidParams(format!("amplitude {amplitude}")));
    }
    Ok((20.0 * (amplitude.max(AMP_EPS) / p_ref).log10()).max(DB_FLOOR))
}

/// Per-frame loudness in dB plus its mean. Frames follow the STFT
/// hopping but are unwindowed, and the RMS of the trailing frames runs
/// over the samples actually present rather than zero padding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntensityProfile {
    pub frame_db: Vec<f64>,
    pub mean_db: f64,
    pub p_ref: f64,
}

pub fn intensity_profile(
    clip: &AudioClip,
    frame_size: usize,
    hop: usize,
    p_ref: f64,
) -> Result<IntensityProfile, AcousticsError> {
    check_framing(frame_size, hop)?;
    if clip.samples.is_empty() {
        return Err(AcousticsError::InvalidParams("empty clip".into()));
    }
    let n_frames = frame_count(clip.samples.len(), hop);
    let mut frame_db = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let start = t * hop;
        let end = (start + frame_size).min(clip.samples.len());
        let frame = &clip.samples[start..end];
        let energy: f64 = frame.iter().map(|&s| (s as f64) * (s as f64)).sum();
        let rms = (energy / frame.len() as f64).sqrt();
        frame_db.push(amplitude_to_db(rms, p_ref)?);
    }
    let mean_db = frame_db.iter().sum::<f64>() / frame_db.len() as f64;
    Ok(IntensityProfile {
        frame_db,
        mean_db,
        p_ref,
    })
}

/// Loudness bands of the comparator table, ordered quiet to loud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityClass {
    Whisper,
    LowVoice,
    NormalSpeech,
    Excited,
}

impl std::fmt::Display for IntensityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            IntensityClass::Whisper => "whisper",
            IntensityClass::LowVoice => "low_voice",
            IntensityClass::NormalSpeech => "normal_speech",
            IntensityClass::Excited => "excited",
        };
        write!(f, "{s}")
    }
}

/// Comparator bands: whisper below 20 dB, low voice in [20, 40),
/// normal speech in [40, 70], excited above 70.
pub fn classify_intensity(mean_db: f64) -> IntensityClass {
    assert!(mean_db.is_finite(), "mean_db must be finite");
    if mean_db < 20.0 {
        IntensityClass::Whisper
    } else if mean_db < 40.0 {
        IntensityClass::LowVoice
    } else if mean_db <= 70.0 {
        IntensityClass::NormalSpeech
    } else {
        IntensityClass::Excited
    }
}

/// HTK-style mel scale.
fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank over FFT bins, `[n_mels][n_bins]`. Filter
/// edges snap to bins so each interior row peaks at exactly 1 before
/// normalization; normalization divides each row by its weight sum.
pub fn mel_filterbank(
    n_mels: usize,
    frame_size: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
    normalize: bool,
) -> Result<Vec<Vec<f64>>, AcousticsError> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_mels == 0 {
        return Err(AcousticsError::InvalidParams("n_mels must be positive".into()));
    }
    if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
        return Err(AcousticsError::InvalidParams(format!(
            "need 0 <= fmin < fmax <= {nyquist}, got [{fmin}, {fmax}]"
        )));
    }
    let n_bins = frame_size / 2 + 1;
    let (mel_lo, mel_hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let bins: Vec<usize> = (0..n_mels + 2)
        .map(|m| {
            let mel = mel_lo + (mel_hi - mel_lo) * m as f64 / (n_mels + 1) as f64;
            let hz = mel_to_hz(mel);
            ((hz * frame_size as f64 / sample_rate as f64).round() as usize).min(n_bins - 1)
        })
        .collect();

    let mut bank = vec![vec![0.0f64; n_bins]; n_mels];
    for m in 0..n_mels {
        let (lo, center, hi) = (bins[m], bins[m + 1], bins[m + 2]);
        let row = &mut bank[m];
        let rise = (center - lo).max(1) as f64;
        for k in lo..=center {
            row[k] = (k - lo) as f64 / rise;
        }
        row[center] = 1.0;
        let fall = (hi - center).max(1) as f64;
        for k in center..=hi {
            row[k] = row[k].max((hi - k) as f64 / fall);
        }
        if normalize {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }
    Ok(bank)
}

/// Apply an area-normalized mel filterbank to the power spectrogram.
/// Output is `[n_mels][n_frames]`.
pub fn mel_spectrogram(
    spec: &Spectrogram,
    n_mels: usize,
    fmin: f64,
    fmax: f64,
) -> Result<Vec<Vec<f64>>, AcousticsError> {
    let bank = mel_filterbank(n_mels, spec.frame_size, spec.sample_rate, fmin, fmax, true)?;
    let n_frames = spec.n_frames();
    let mut out = vec![vec![0.0f64; n_frames]; n_mels];
    for (m, filt) in bank.iter().enumerate() {
        for t in 0..n_frames {
            let mut acc = 0.0;
            for (k, &w) in filt.iter().enumerate() {
                if w != 0.0 {
                    let mag = spec.magnitudes[k][t];
                    acc += w * mag * mag;
                }
            }
            out[m][t] = acc;
        }
    }
    Ok(out)
}
