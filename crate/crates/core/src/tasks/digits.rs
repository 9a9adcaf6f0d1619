//! Spoken-digit recognition over every train/test split.
//!
//! Utterances are grouped by their within-slot index (1-10). Each group
//! keeps sufficient statistics (the summed state Gram matrix, the summed
//! one-hot-weighted column sums and per-utterance mean state vectors), so
//! all C(10, n) splits train from cheap sums instead of re-touching the
//! node states. A word is classified by the class row with the largest
//! time-averaged output, which for a linear readout equals applying the
//! weights to the utterance's mean state vector.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::audio::{Corpus, FrontendKind};
use crate::encoder::{control_states, encode_drive, sample_nodes, EncodingConfig, Mask};
use crate::error::Result;
use crate::oscillator::{simulate_envelope, BiasPoint, OscillatorParams};
use crate::readout::{argmax, train_weights_gram};
use crate::seeds::derive_seed;

use super::{enumerate_splits, mean_and_std, Mode, SplitPlan, SplitResult, TaskReport};

const N_DIGITS: usize = 10;

/// How to turn corpus audio into node states.
#[derive(Clone, Copy, Debug)]
pub struct DigitTaskSetup<'a> {
    pub frontend: FrontendKind,
    pub mode: Mode,
    pub mask: &'a Mask,
    pub encoding: &'a EncodingConfig,
    pub params: &'a OscillatorParams,
    pub bias: BiasPoint,
    pub noise_seed: u64,
}

/// Sufficient statistics of one utterance-index group.
struct UtteranceGroup {
    /// Sum of `S S^T` over the group's utterances.
    gram: DMatrix<f64>,
    /// Sum of `e_digit * colsum(S)^T`; equals `Y S^T` for one-hot targets.
    cross: DMatrix<f64>,
    n_cols: usize,
    /// `(digit, mean state)` per utterance, canonical order.
    means: Vec<(u8, DVector<f64>)>,
}

/// Node-state statistics for a whole corpus under one setup.
pub struct PreparedStates {
    groups: Vec<UtteranceGroup>,
    n_rows: usize,
}

impl PreparedStates {
    pub fn n_utterances(&self) -> u8 {
        self.groups.len() as u8
    }

    pub fn n_state_rows(&self) -> usize {
        self.n_rows
    }
}

/// Runs the frontend, encoder and (in oscillator mode) the simulation for
/// every utterance, reducing each to its sufficient statistics. Noise seeds
/// derive from the utterance's canonical ordinal, so results do not depend
/// on evaluation order.
pub fn prepare_digit_states(corpus: &Corpus, setup: &DigitTaskSetup) -> Result<PreparedStates> {
    let n_utt = corpus.n_utterances() as usize;
    let per_utterance: Vec<(DMatrix<f64>, DVector<f64>, usize)> = corpus
        .signals()
        .par_iter()
        .enumerate()
        .map(|(ordinal, signal)| {
            let features = setup.frontend.features(signal)?;
            let states = match setup.mode {
                Mode::Control => control_states(&features, setup.mask, setup.encoding)?,
                Mode::Oscillator => {
                    let drive = encode_drive(&features, setup.mask, setup.encoding)?;
                    let trace = simulate_envelope(
                        setup.params,
                        setup.bias,
                        &drive,
                        derive_seed(setup.noise_seed, ordinal as u64),
                    )?;
                    sample_nodes(&trace, setup.encoding, features.n_intervals())?
                }
            };
            let s = states.data;
            let gram = &s * s.transpose();
            let colsum: DVector<f64> = s.column_sum();
            Ok((gram, colsum, s.ncols()))
        })
        .collect::<Result<_>>()?;

    let rows = setup.encoding.n_state_rows();
    let mut groups: Vec<UtteranceGroup> = (0..n_utt)
        .map(|_| UtteranceGroup {
            gram: DMatrix::zeros(rows, rows),
            cross: DMatrix::zeros(N_DIGITS, rows),
            n_cols: 0,
            means: Vec::new(),
        })
        .collect();
    let per_digit = corpus.speakers().len() * n_utt;
    for (ordinal, (gram, colsum, n_cols)) in per_utterance.into_iter().enumerate() {
        let digit = (ordinal / per_digit) as u8;
        let group = &mut groups[ordinal % n_utt];
        group.gram += gram;
        for (c, v) in colsum.iter().enumerate() {
            group.cross[(digit as usize, c)] += v;
        }
        group.means.push((digit, colsum / n_cols as f64));
        group.n_cols += n_cols;
    }
    Ok(PreparedStates { groups, n_rows: rows })
}

fn score_split(
    prepared: &PreparedStates,
    plan: &SplitPlan,
    ridge: f64,
) -> Result<(SplitResult, Vec<Vec<u64>>)> {
    let rows = prepared.n_rows;
    let mut gram = DMatrix::zeros(rows, rows);
    let mut cross = DMatrix::zeros(N_DIGITS, rows);
    let mut n_cols = 0;
    for &u in &plan.train {
        let g = &prepared.groups[u as usize - 1];
        gram += &g.gram;
        cross += &g.cross;
        n_cols += g.n_cols;
    }
    let weights = train_weights_gram(&gram, &cross, n_cols, ridge)?;

    let mut test_gram = DMatrix::zeros(rows, rows);
    let mut test_cross = DMatrix::zeros(N_DIGITS, rows);
    let mut n_test_cols = 0usize;
    let mut confusion = vec![vec![0u64; N_DIGITS]; N_DIGITS];
    let mut correct = 0u64;
    let mut total = 0u64;
    for &u in &plan.test {
        let g = &prepared.groups[u as usize - 1];
        test_gram += &g.gram;
        test_cross += &g.cross;
        n_test_cols += g.n_cols;
        for (digit, mean) in &g.means {
            let predicted = argmax(&(&weights.matrix * mean));
            confusion[*digit as usize][predicted] += 1;
            total += 1;
            correct += u64::from(predicted == *digit as usize);
        }
    }

    // ||W S - Y||^2 over the test columns from the sufficient statistics:
    // tr(W G W^T) - 2 <W, Y S^T> + (one 1 per one-hot column).
    let wg = &weights.matrix * &test_gram;
    let mut squared = n_test_cols as f64;
    for (a, w) in wg.iter().zip(weights.matrix.iter()) {
        squared += a * w;
    }
    for (t, w) in test_cross.iter().zip(weights.matrix.iter()) {
        squared -= 2.0 * t * w;
    }
    let rms = (squared.max(0.0) / (N_DIGITS * n_test_cols) as f64).sqrt();

    Ok((
        SplitResult {
            train_utterances: plan.train.clone(),
            word_success_rate: correct as f64 / total as f64,
            rms_deviation: rms,
        },
        confusion,
    ))
}

/// Trains and scores every split with `n_train` training utterances.
pub fn run_spoken_digits(
    prepared: &PreparedStates,
    n_train: usize,
    ridge: f64,
) -> Result<TaskReport> {
    let splits = enumerate_splits(prepared.n_utterances(), n_train)?;
    let per_split: Vec<(SplitResult, Vec<Vec<u64>>)> = splits
        .par_iter()
        .map(|plan| score_split(prepared, plan, ridge))
        .collect::<Result<_>>()?;

    let wsrs: Vec<f64> = per_split.iter().map(|(s, _)| s.word_success_rate).collect();
    let rmss: Vec<f64> = per_split.iter().map(|(s, _)| s.rms_deviation).collect();
    let mut confusion = vec![vec![0u64; N_DIGITS]; N_DIGITS];
    for (_, c) in &per_split {
        for (row, crow) in confusion.iter_mut().zip(c) {
            for (cell, v) in row.iter_mut().zip(crow) {
                *cell += v;
            }
        }
    }
    let (word_success_rate, wsr_std) = mean_and_std(&wsrs);
    let (rms_deviation, _) = mean_and_std(&rmss);
    Ok(TaskReport {
        n_train,
        word_success_rate,
        wsr_std,
        rms_deviation,
        confusion,
        splits: per_split.into_iter().map(|(s, _)| s).collect(),
    })
}
