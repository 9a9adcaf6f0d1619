//! Synthetic spoken-digit corpus.
//!
//! Each digit is a cyclic two-tone chord code over a shared ten-tone
//! alphabet. Digits 0-8 use the nine rounds of a round-robin pairing of the
//! ten tones (the circle method): round `d` plays its five disjoint tone
//! pairs in sequence, so each cycle sounds every tone exactly once and the
//! pair sets of different digits share no pair at all. Digit 9 plays each
//! tone alone at doubled amplitude. Utterances hold a whole number of
//! cycles, hence the time-averaged spectrum is digit-independent and only
//! tone co-occurrence identifies the digit. Speakers differ by a fixed
//! frequency factor and a spectral tilt; utterances vary in chord tempo,
//! level, phase and length.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::audio::{AudioSignal, Corpus};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_from_seed};

const N_TONES: usize = 10;
const BASE_FREQ: f64 = 600.0;
const TONE_STEP: f64 = 400.0;
const SPEAKER_FACTORS: [f64; 5] = [0.92, 0.96, 1.0, 1.045, 1.09];
const SPEAKER_TILTS: [f64; 5] = [-0.2, -0.1, 0.0, 0.1, 0.2];
/// Steps per utterance; a multiple of both cycle lengths (5 chords for
/// digits 0-8, 10 solo tones for digit 9).
const STEPS: usize = 20;
const BASE_STEP: f64 = 0.021; // seconds per chord step
const RAMP: f64 = 0.004; // seconds, raised-cosine fade per chord edge
const NOISE_LEVEL: f64 = 0.01;
const PEAK: f64 = 0.85;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthCorpusOptions {
    pub n_speakers: usize,
    pub n_utterances: u8,
    pub sample_rate: f64,
}

impl Default for SynthCorpusOptions {
    fn default() -> Self {
        SynthCorpusOptions { n_speakers: 5, n_utterances: 10, sample_rate: 12_500.0 }
    }
}

/// Generates the corpus. Every utterance draws from its own seed derived
/// from `seed` and the utterance's canonical ordinal, so the result does
/// not depend on generation order.
pub fn synth_corpus(opts: &SynthCorpusOptions, seed: u64) -> Result<Corpus> {
    if opts.n_speakers == 0 || opts.n_speakers > SPEAKER_FACTORS.len() {
        return Err(Error::InvalidParameter(format!(
            "n_speakers must be in 1..={}, got {}",
            SPEAKER_FACTORS.len(),
            opts.n_speakers
        )));
    }
    if !(1..=10).contains(&opts.n_utterances) {
        return Err(Error::InvalidParameter(format!(
            "n_utterances must be in 1..=10, got {}",
            opts.n_utterances
        )));
    }
    if !opts.sample_rate.is_finite() || opts.sample_rate <= 0.0 {
        return Err(Error::InvalidParameter("sample_rate must be > 0".into()));
    }
    let mut signals = Vec::with_capacity(10 * opts.n_speakers * opts.n_utterances as usize);
    for digit in 0..10u8 {
        for sp in 0..opts.n_speakers {
            for utterance in 1..=opts.n_utterances {
                let ordinal = (digit as u64 * opts.n_speakers as u64 + sp as u64)
                    * opts.n_utterances as u64
                    + (utterance - 1) as u64;
                let mut rng = rng_from_seed(derive_seed(seed, ordinal));
                signals.push(render_utterance(digit, sp, utterance, opts.sample_rate, &mut rng));
            }
        }
    }
    Corpus::from_signals(signals)
}

fn render_utterance(
    digit: u8,
    sp: usize,
    utterance: u8,
    rate: f64,
    rng: &mut impl Rng,
) -> AudioSignal {
    // Whole cycles only: every tone then appears equally often, so the
    // time-averaged spectrum is the same for every digit and every phase.
    let tempo = BASE_STEP * rng.gen_range(0.85..1.15);
    let step_lens: Vec<usize> = (0..STEPS)
        .map(|_| (tempo * rng.gen_range(0.97..1.03) * rate).round() as usize)
        .collect();
    let n_samples = step_lens.iter().sum();
    let phase: usize = rng.gen_range(0..N_TONES);
    let freq_factor = SPEAKER_FACTORS[sp];
    let tilt = SPEAKER_TILTS[sp];

    let mut samples = vec![0.0f64; n_samples];
    let mut start = 0usize;
    for (step, &step_len) in step_lens.iter().enumerate() {
        let end = start + step_len;
        let amp = 0.3 * rng.gen_range(0.8..1.2);
        let (t0, t1) = chord(digit, step + phase);
        // For digit 9 both chord slots name one tone, which simply doubles.
        for tone in [t0, t1] {
            let freq = freq_factor * (BASE_FREQ + TONE_STEP * tone as f64);
            let gain = amp * (1.0 + tilt * (tone as f64 / (N_TONES - 1) as f64 - 0.5));
            for i in start..end {
                let t = (i - start) as f64 / rate;
                samples[i] += gain
                    * ramp_gain(i - start, end - start, rate)
                    * (std::f64::consts::TAU * freq * t).sin();
            }
        }
        start = end;
    }
    for s in samples.iter_mut() {
        *s += NOISE_LEVEL * rng.sample::<f64, _>(StandardNormal);
    }
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let scale = PEAK / peak;
        for s in samples.iter_mut() {
            *s *= scale;
        }
    }
    AudioSignal {
        samples,
        sample_rate: rate,
        digit,
        speaker: format!("s{}", sp + 1),
        utterance,
    }
}

/// The two tones of chord step `s` for `digit`. Digits 0-8 follow round
/// `digit` of a circle-method round robin over the ten tones: tone 9 is the
/// hub and pairs with tone `digit`, and tone `digit + i` pairs with tone
/// `digit - i` (mod 9) for `i` in 1..=4, giving nine rounds whose pair sets
/// are mutually disjoint. Digit 9 sounds one tone per step, doubled.
fn chord(digit: u8, step: usize) -> (usize, usize) {
    let d = digit as usize;
    if d == 9 {
        let t = step % N_TONES;
        return (t, t);
    }
    match step % 5 {
        0 => (9, d),
        i => ((d + i) % 9, (d + 9 - i) % 9),
    }
}

/// Raised-cosine fade in and out over the first and last `RAMP` seconds of
/// a chord, so steps do not click.
fn ramp_gain(i: usize, len: usize, rate: f64) -> f64 {
    let ramp = ((RAMP * rate).round() as usize).clamp(1, len / 2 + 1);
    let fade = |k: usize| {
        if k >= ramp {
            1.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * (k + 1) as f64 / (ramp + 1) as f64).cos())
        }
    };
    fade(i) * fade(len - 1 - i)
}
