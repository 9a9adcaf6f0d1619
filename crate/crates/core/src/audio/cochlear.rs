//! Cochlear-style filter bank frontend.
//!
//! 78 channels with geometrically spaced center frequencies between 100 Hz
//! and 5.5 kHz. Each channel is a fourth-order gammatone approximation:
//! four cascaded complex one-pole resonators whose bandwidth follows the
//! equivalent rectangular bandwidth of the auditory filter at the channel
//! center. The real part is half-wave rectified, smoothed by an 8 ms
//! envelope follower and averaged over 160-sample frames.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;

use super::{resample_linear, AudioSignal, FeatureMatrix, FRONTEND_RATE};
use crate::error::{Error, Result};

pub const COCHLEAR_CHANNELS: usize = 78;

const F_LO: f64 = 100.0;
const F_HI: f64 = 5_500.0;
const STAGES: usize = 4;
const FRAME_LEN: usize = 160;
const SMOOTH_TAU: f64 = 0.008; // seconds

pub(crate) fn center_frequency(channel: usize) -> f64 {
    let t = channel as f64 / (COCHLEAR_CHANNELS - 1) as f64;
    F_LO * (F_HI / F_LO).powf(t)
}

/// Equivalent rectangular bandwidth (Hz) of the auditory filter centered at
/// `f` Hz.
fn erb(f: f64) -> f64 {
    24.7 + f / 9.265
}

fn pole(fc: f64, fs: f64) -> Complex<f64> {
    let r = (-std::f64::consts::TAU * 1.019 * erb(fc) / fs).exp();
    Complex::from_polar(r, std::f64::consts::TAU * fc / fs)
}

/// Band-pass response of one channel before rectification: real part of
/// four cascaded complex one-pole resonators, scaled by `(1 - r)^4` so the
/// peak gain stays near unity across channels.
pub(crate) fn filter_channel(samples: &[f64], fc: f64, fs: f64) -> Vec<f64> {
    let a = pole(fc, fs);
    let gain = (1.0 - a.norm()).powi(STAGES as i32);
    let mut stages = [Complex::new(0.0, 0.0); STAGES];
    samples
        .iter()
        .map(|&x| {
            let mut v = Complex::new(x, 0.0);
            for s in stages.iter_mut() {
                *s = v + a * *s;
                v = *s;
            }
            gain * v.re
        })
        .collect()
}

/// Filter bank features without the per-utterance normalization.
pub fn cochlear_features_raw(audio: &AudioSignal) -> Result<FeatureMatrix> {
    audio.validate()?;
    let samples = resample_linear(&audio.samples, audio.sample_rate, FRONTEND_RATE);
    if samples.len() < FRAME_LEN {
        return Err(Error::InvalidParameter(format!(
            "audio too short for the cochlear frontend: {} samples after resampling, need {FRAME_LEN}",
            samples.len()
        )));
    }
    let n_frames = samples.len().div_ceil(FRAME_LEN);
    let alpha = 1.0 - (-1.0 / (FRONTEND_RATE * SMOOTH_TAU)).exp();
    let mut data = DMatrix::zeros(COCHLEAR_CHANNELS, n_frames);
    for c in 0..COCHLEAR_CHANNELS {
        let band = filter_channel(&samples, center_frequency(c), FRONTEND_RATE);
        let mut env = 0.0;
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut frame = 0usize;
        for (n, v) in band.iter().enumerate() {
            env += alpha * (v.max(0.0) - env);
            acc += env;
            count += 1;
            if count == FRAME_LEN || n + 1 == band.len() {
                data[(c, frame)] = acc / count as f64;
                frame += 1;
                acc = 0.0;
                count = 0;
            }
        }
    }
    FeatureMatrix::new(data)
}

/// Filter bank features, max-normalized per utterance.
pub fn cochlear_features(audio: &AudioSignal) -> Result<FeatureMatrix> {
    let mut features = cochlear_features_raw(audio)?;
    features.normalize_peak();
    Ok(features)
}
