//! Short-window magnitude spectrogram frontend.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{resample_linear, AudioSignal, FeatureMatrix, FRONTEND_RATE};
use crate::error::{Error, Result};

/// Output channels: FFT bins `0..=WINDOW_LEN / 2` of a real window.
pub const SPECTROGRAM_CHANNELS: usize = 65;

const WINDOW_LEN: usize = 128;
const HOP: usize = 64;

/// Magnitude spectrogram without the per-utterance normalization.
///
/// The signal is resampled to the frontend rate and cut into Hann windows
/// of 128 samples advancing by 64; the tail is zero padded so every input
/// sample is covered. Each window contributes one column of 65 bin
/// magnitudes.
pub fn spectrogram_features_raw(audio: &AudioSignal) -> Result<FeatureMatrix> {
    audio.validate()?;
    let samples = resample_linear(&audio.samples, audio.sample_rate, FRONTEND_RATE);
    if samples.len() < WINDOW_LEN {
        return Err(Error::InvalidParameter(format!(
            "audio too short for the spectrogram frontend: {} samples after resampling, need {WINDOW_LEN}",
            samples.len()
        )));
    }
    let n_windows = samples.len().div_ceil(HOP);
    let window: Vec<f64> = (0..WINDOW_LEN)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / WINDOW_LEN as f64).cos()))
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(WINDOW_LEN);
    let mut data = DMatrix::zeros(SPECTROGRAM_CHANNELS, n_windows);
    let mut buf = vec![Complex::new(0.0, 0.0); WINDOW_LEN];
    for t in 0..n_windows {
        let start = t * HOP;
        for (i, slot) in buf.iter_mut().enumerate() {
            let s = samples.get(start + i).copied().unwrap_or(0.0);
            *slot = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buf);
        for c in 0..SPECTROGRAM_CHANNELS {
            data[(c, t)] = buf[c].norm();
        }
    }
    FeatureMatrix::new(data)
}

/// Spectrogram features, max-normalized per utterance.
pub fn spectrogram_features(audio: &AudioSignal) -> Result<FeatureMatrix> {
    let mut features = spectrogram_features_raw(audio)?;
    features.normalize_peak();
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sine(freq: f64, rate: f64, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (std::f64::consts::TAU * freq * i as f64 / rate).sin())
            .collect()
    }

    fn signal(samples: Vec<f64>, rate: f64) -> AudioSignal {
        AudioSignal { samples, sample_rate: rate, digit: 0, speaker: "s1".into(), utterance: 1 }
    }

    fn argmax(col: nalgebra::DVectorView<f64>) -> usize {
        col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
    }

    #[test]
    fn pure_tone_peaks_in_its_bin() {
        // Bin 16 center sits at 16 * 12500 / 128 = 1562.5 Hz.
        let audio = signal(sine(1562.5, FRONTEND_RATE, 2000, 0.8), FRONTEND_RATE);
        let f = spectrogram_features_raw(&audio).unwrap();
        let full_windows = (2000 - WINDOW_LEN) / HOP + 1;
        for t in 0..full_windows {
            assert_eq!(argmax(f.data().column(t)), 16, "window {t}");
        }
    }

    #[test]
    fn resampled_tone_lands_in_the_same_bin() {
        let audio = signal(sine(1562.5, 50_000.0, 8000, 0.8), 50_000.0);
        let f = spectrogram_features_raw(&audio).unwrap();
        assert_eq!(argmax(f.data().column(3)), 16);
    }

    #[test]
    fn window_count_matches_direct_enumeration() {
        for len in [128usize, 129, 600, 640, 641, 2000] {
            let audio = signal(vec![0.1; len], FRONTEND_RATE);
            let f = spectrogram_features_raw(&audio).unwrap();
            // Walk the hops the way the framer does.
            let mut count = 0;
            let mut start = 0;
            while start < len {
                count += 1;
                start += HOP;
            }
            assert_eq!(f.n_intervals(), count, "len {len}");
            assert_eq!(f.n_channels(), SPECTROGRAM_CHANNELS);
        }
    }

    #[test]
    fn silence_maps_to_zeros() {
        let audio = signal(vec![0.0; 1000], FRONTEND_RATE);
        let f = spectrogram_features(&audio).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn raw_magnitudes_scale_linearly_with_amplitude() {
        let quiet = signal(sine(900.0, FRONTEND_RATE, 1500, 0.2), FRONTEND_RATE);
        let loud = signal(sine(900.0, FRONTEND_RATE, 1500, 0.6), FRONTEND_RATE);
        let fq = spectrogram_features_raw(&quiet).unwrap();
        let fl = spectrogram_features_raw(&loud).unwrap();
        for (a, b) in fq.data().iter().zip(fl.data().iter()) {
            assert_relative_eq!(3.0 * a, *b, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn normalized_peak_is_one() {
        let audio = signal(sine(700.0, FRONTEND_RATE, 1500, 0.5), FRONTEND_RATE);
        let f = spectrogram_features(&audio).unwrap();
        let max = f.data().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn short_input_is_rejected() {
        let audio = signal(vec![0.0; WINDOW_LEN - 1], FRONTEND_RATE);
        assert!(spectrogram_features_raw(&audio).is_err());
    }

    #[test]
    fn repeated_runs_are_identical() {
        let audio = signal(sine(1200.0, FRONTEND_RATE, 1777, 0.4), FRONTEND_RATE);
        assert_eq!(spectrogram_features(&audio).unwrap(), spectrogram_features(&audio).unwrap());
    }
}
