//! Audio inputs: corpus signals, feature matrices and the two stock
//! frontends (short-window spectrogram and a cochlear-style filter bank).
//!
//! A feature matrix holds one column per input interval; the stock frontends
//! produce 65 (spectrogram) or 78 (cochlear) non-negative channels,
//! max-normalized per utterance so every utterance spans `[0, 1]`.

mod cochlear;
mod corpus;
mod spectrogram;

pub use cochlear::{cochlear_features, cochlear_features_raw, COCHLEAR_CHANNELS};
pub use corpus::{load_corpus, write_corpus, Corpus};
pub use spectrogram::{spectrogram_features, spectrogram_features_raw, SPECTROGRAM_CHANNELS};

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Audio sample rate (Hz) the frontends operate at; inputs at other rates
/// are resampled on entry.
pub const FRONTEND_RATE: f64 = 12_500.0;

/// One utterance: normalized samples plus its corpus coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioSignal {
    /// Samples in `[-1, 1]`.
    pub samples: Vec<f64>,
    /// Sample rate in Hz.
    pub sample_rate: f64,
    /// Spoken digit, 0-9.
    pub digit: u8,
    /// Speaker identifier.
    pub speaker: String,
    /// Utterance index within (digit, speaker), 1-10.
    pub utterance: u8,
}

impl AudioSignal {
    pub fn validate(&self) -> Result<()> {
        if self.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!(
                "audio samples for digit {} speaker {} utterance {}",
                self.digit, self.speaker, self.utterance
            )));
        }
        if !self.sample_rate.is_finite() || self.sample_rate <= 0.0 {
            return Err(Error::InvalidParameter("sample_rate must be > 0".into()));
        }
        if self.digit > 9 {
            return Err(Error::InvalidParameter(format!("digit {} out of 0-9", self.digit)));
        }
        if !(1..=10).contains(&self.utterance) {
            return Err(Error::InvalidParameter(format!(
                "utterance index {} out of 1-10",
                self.utterance
            )));
        }
        if self.speaker.is_empty() {
            return Err(Error::InvalidParameter("empty speaker id".into()));
        }
        Ok(())
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Which stock frontend turns audio into features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontendKind {
    Spectrogram,
    Cochlear,
}

impl FrontendKind {
    pub fn n_channels(self) -> usize {
        match self {
            FrontendKind::Spectrogram => SPECTROGRAM_CHANNELS,
            FrontendKind::Cochlear => COCHLEAR_CHANNELS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrontendKind::Spectrogram => "spectrogram",
            FrontendKind::Cochlear => "cochlear",
        }
    }

    /// Runs the frontend, including per-utterance normalization.
    pub fn features(self, audio: &AudioSignal) -> Result<FeatureMatrix> {
        match self {
            FrontendKind::Spectrogram => spectrogram_features(audio),
            FrontendKind::Cochlear => cochlear_features(audio),
        }
    }
}

/// Channels x intervals matrix of input features; column `j` feeds the j-th
/// input interval of the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::ShapeMismatch("empty feature matrix".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(FeatureMatrix { data })
    }

    /// Single-channel features from a plain sequence of values.
    pub fn from_sequence(values: &[f64]) -> Result<Self> {
        FeatureMatrix::new(DMatrix::from_row_slice(1, values.len(), values))
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_intervals(&self) -> usize {
        self.data.ncols()
    }

    /// Per-utterance max normalization: rescales so the largest entry is 1.
    /// Silence (all zeros) stays untouched.
    pub fn normalize_peak(&mut self) {
        let max = self.data.iter().fold(0.0f64, |m, &v| m.max(v));
        if max > 0.0 {
            self.data /= max;
        }
    }
}

/// Linear-interpolation resampling. Output length is the input duration
/// times the target rate, rounded; positions past the last input sample
/// hold its value.
pub(crate) fn resample_linear(samples: &[f64], from_rate: f64, to_rate: f64) -> Vec<f64> {
    if samples.is_empty() || (from_rate - to_rate).abs() < 1e-9 * to_rate {
        return samples.to_vec();
    }
    let n_out = ((samples.len() as f64 * to_rate / from_rate).round() as usize).max(1);
    let step = from_rate / to_rate;
    (0..n_out)
        .map(|i| {
            let x = i as f64 * step;
            let i0 = x.floor() as usize;
            if i0 + 1 >= samples.len() {
                samples[samples.len() - 1]
            } else {
                let frac = x - i0 as f64;
                samples[i0] * (1.0 - frac) + samples[i0 + 1] * frac
            }
        })
        .collect()
}

/// Writes a feature matrix as delimited text with its dimensions in a
/// commented header: one row per channel, one comma-separated column per
/// interval.
pub fn write_features<W: Write>(mut out: W, features: &FeatureMatrix) -> io::Result<()> {
    writeln!(out, "# stno features v1")?;
    writeln!(out, "# channels: {}", features.n_channels())?;
    writeln!(out, "# intervals: {}", features.n_intervals())?;
    for i in 0..features.n_channels() {
        let row: Vec<String> = features.data.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
