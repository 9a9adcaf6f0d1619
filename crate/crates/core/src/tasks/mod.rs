//! Benchmark tasks: sine/square discrimination and spoken-digit
//! recognition, plus the train/test split machinery shared between them.

mod digits;
mod sine_square;
mod synth;

pub use digits::{prepare_digit_states, run_spoken_digits, DigitTaskSetup, PreparedStates};
pub use sine_square::{
    run_sine_square, sine_square_input, SineSquareOptions, SineSquareReport, SineSquareRun,
    SineSquareSeeds,
};
pub use synth::{synth_corpus, SynthCorpusOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether node states come from the oscillator or from the pass-through
/// control that skips the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Oscillator,
    Control,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Oscillator => "oscillator",
            Mode::Control => "control",
        }
    }
}

/// One train/test partition of the utterance indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: Vec<u8>,
    pub test: Vec<u8>,
}

/// Every way of picking `n_train` of the `n_utterances` utterance indices
/// (1-based), in lexicographic order of the training set.
pub fn enumerate_splits(n_utterances: u8, n_train: usize) -> Result<Vec<SplitPlan>> {
    let n = n_utterances as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidParameter(format!(
            "n_train must be in 1..={}, got {n_train}",
            n.saturating_sub(1)
        )));
    }
    let mut train: Vec<u8> = (1..=n_train as u8).collect();
    let mut out = Vec::new();
    loop {
        let test: Vec<u8> = (1..=n_utterances).filter(|u| !train.contains(u)).collect();
        out.push(SplitPlan { train: train.clone(), test });
        let mut i = n_train;
        let advanced = loop {
            if i == 0 {
                break false;
            }
            i -= 1;
            if train[i] < n_utterances - (n_train - 1 - i) as u8 {
                train[i] += 1;
                for j in i + 1..n_train {
                    train[j] = train[j - 1] + 1;
                }
                break true;
            }
        };
        if !advanced {
            return Ok(out);
        }
    }
}

/// Digit-task outcome of a single split.
#[derive(Clone, Debug)]
pub struct SplitResult {
    pub train_utterances: Vec<u8>,
    pub word_success_rate: f64,
    pub rms_deviation: f64,
}

/// Digit-task outcome over every split at one training-set size.
#[derive(Clone, Debug)]
pub struct TaskReport {
    pub n_train: usize,
    /// Mean word success rate over splits.
    pub word_success_rate: f64,
    /// Sample standard deviation of the per-split rates.
    pub wsr_std: f64,
    /// Mean test rms deviation over splits.
    pub rms_deviation: f64,
    /// `confusion[truth][predicted]`, summed over splits.
    pub confusion: Vec<Vec<u64>>,
    pub splits: Vec<SplitResult>,
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub(crate) fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
