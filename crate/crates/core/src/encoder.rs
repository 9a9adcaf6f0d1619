//! Time-multiplexing encoder.
//!
//! Each input interval of duration `tau = n_theta * theta` is chopped into
//! `n_theta` virtual-node slots. A fixed random mask projects the feature
//! column of the interval onto one value per slot; the values are affinely
//! rescaled so the whole utterance spans `i_pp` mA peak to peak centered on
//! zero, and each value is held for `samples_per_theta` drive samples.
//! Node states are read back from the envelope by sampling the tail of every
//! slot; a constant bias row is appended so the readout has an offset term.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::FeatureMatrix;
use crate::error::{Error, Result};
use crate::oscillator::{DriveWaveform, EnvelopeTrace};
use crate::seeds::{rng_from_seed, PRNG_NAME};

/// Two-letter alphabets the mask entries are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskAlphabet {
    /// `{0, 1}`, used for the spoken-digit encoder.
    #[serde(rename = "binary01")]
    Binary01,
    /// `{-1, +1}`, used for the sine/square encoder.
    #[serde(rename = "pm1")]
    PlusMinus1,
}

impl MaskAlphabet {
    fn draw(self, rng: &mut impl Rng) -> f64 {
        match self {
            MaskAlphabet::Binary01 => {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    0.0
                }
            }
            MaskAlphabet::PlusMinus1 => {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

impl fmt::Display for MaskAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskAlphabet::Binary01 => write!(f, "binary01"),
            MaskAlphabet::PlusMinus1 => write!(f, "pm1"),
        }
    }
}

impl FromStr for MaskAlphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary01" => Ok(MaskAlphabet::Binary01),
            "pm1" => Ok(MaskAlphabet::PlusMinus1),
            other => Err(Error::InvalidParameter(format!("unknown mask alphabet `{other}`"))),
        }
    }
}

/// Fixed random mask (`n_features x n_theta`) tying feature channels to
/// virtual-node slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    values: DMatrix<f64>,
    seed: u64,
    alphabet: MaskAlphabet,
}

impl Mask {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_features(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_theta(&self) -> usize {
        self.values.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alphabet(&self) -> MaskAlphabet {
        self.alphabet
    }

    /// The persistable identity of this mask.
    pub fn record(&self) -> MaskRecord {
        MaskRecord {
            prng: PRNG_NAME.to_string(),
            seed: self.seed,
            n_features: self.n_features(),
            n_theta: self.n_theta(),
            alphabet: self.alphabet,
        }
    }

    #[cfg(test)]
    pub(crate) fn from_values(values: DMatrix<f64>, alphabet: MaskAlphabet) -> Mask {
        Mask { values, seed: 0, alphabet }
    }
}

/// Masks are persisted as records, never as raw matrices: the tuple below
/// reconstructs the matrix bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub prng: String,
    pub seed: u64,
    pub n_features: usize,
    pub n_theta: usize,
    pub alphabet: MaskAlphabet,
}

impl MaskRecord {
    pub fn reconstruct(&self) -> Result<Mask> {
        if self.prng != PRNG_NAME {
            return Err(Error::InvalidParameter(format!(
                "mask record uses prng `{}`, this build provides `{PRNG_NAME}`",
                self.prng
            )));
        }
        make_mask(self.n_features, self.n_theta, self.alphabet, self.seed)
    }
}

impl fmt::Display for MaskRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "prng={} seed={} n_features={} n_theta={} alphabet={}",
            self.prng, self.seed, self.n_features, self.n_theta, self.alphabet
        )
    }
}

impl FromStr for MaskRecord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut prng = None;
        let mut seed = None;
        let mut n_features = None;
        let mut n_theta = None;
        let mut alphabet = None;
        for field in s.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("bad mask record field `{field}`")))?;
            match key {
                "prng" => prng = Some(value.to_string()),
                "seed" => seed = value.parse().ok(),
                "n_features" => n_features = value.parse().ok(),
                "n_theta" => n_theta = value.parse().ok(),
                "alphabet" => alphabet = Some(value.parse()?),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown mask record key `{other}`"
                    )))
                }
            }
        }
        let missing = || Error::InvalidParameter("incomplete mask record".into());
        Ok(MaskRecord {
            prng: prng.ok_or_else(missing)?,
            seed: seed.ok_or_else(missing)?,
            n_features: n_features.ok_or_else(missing)?,
            n_theta: n_theta.ok_or_else(missing)?,
            alphabet: alphabet.ok_or_else(missing)?,
        })
    }
}

/// Draws a fresh mask: i.i.d. uniform entries over the alphabet, filled
/// column by column from the named PRNG.
pub fn make_mask(
    n_features: usize,
    n_theta: usize,
    alphabet: MaskAlphabet,
    seed: u64,
) -> Result<Mask> {
    if n_features == 0 || n_theta == 0 {
        return Err(Error::ShapeMismatch("mask dimensions must be at least 1x1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = DMatrix::zeros(n_features, n_theta);
    for c in 0..n_theta {
        for r in 0..n_features {
            values[(r, c)] = alphabet.draw(&mut rng);
        }
    }
    Ok(Mask { values, seed, alphabet })
}

/// Timing and amplitude layout of the time-multiplexed drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingConfig {
    /// Virtual nodes per input interval.
    pub n_theta: usize,
    /// Slot duration in ns.
    pub theta: f64,
    /// Drive samples per slot; the drive `dt` is `theta / samples_per_theta`.
    pub samples_per_theta: usize,
    /// Envelope samples recorded per node (from the slot tail).
    pub oversample: usize,
    /// Alphabet the mask is drawn from.
    pub alphabet: MaskAlphabet,
    /// Peak-to-peak current span of the rescaled drive, mA.
    pub i_pp: f64,
    /// Peak-to-peak voltage of the source signal, mV (informational).
    #[serde(default)]
    pub v_in_pp: f64,
    /// Sampling alignment offset in ns, rounded to whole drive samples.
    #[serde(default)]
    pub align_offset: f64,
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta == 0 {
            return Err(Error::InvalidParameter("n_theta must be >= 1".into()));
        }
        if self.samples_per_theta == 0 {
            return Err(Error::InvalidParameter("samples_per_theta must be >= 1".into()));
        }
        if self.oversample == 0 || self.oversample > self.samples_per_theta {
            return Err(Error::InvalidParameter(format!(
                "oversample must be in 1..={}, got {}",
                self.samples_per_theta, self.oversample
            )));
        }
        if !self.theta.is_finite() || self.theta <= 0.0 {
            return Err(Error::InvalidParameter("theta must be > 0".into()));
        }
        if !self.i_pp.is_finite() || self.i_pp < 0.0 {
            return Err(Error::InvalidParameter("i_pp must be >= 0".into()));
        }
        if !self.align_offset.is_finite() || self.align_offset.abs() > self.theta {
            return Err(Error::InvalidParameter(format!(
                "align_offset must stay within one slot (+-{} ns), got {}",
                self.theta, self.align_offset
            )));
        }
        Ok(())
    }

    /// Drive time step in ns; `theta = samples_per_theta * dt` by
    /// construction.
    pub fn dt(&self) -> f64 {
        self.theta / self.samples_per_theta as f64
    }

    /// Drive samples per input interval.
    pub fn samples_per_interval(&self) -> usize {
        self.n_theta * self.samples_per_theta
    }

    /// Rows of the node-state matrix including the bias row.
    pub fn n_state_rows(&self) -> usize {
        self.n_theta * self.oversample + 1
    }
}

/// Node states: `n_theta * oversample + 1` rows (bias row of ones last) by
/// one column per input interval.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeStateMatrix {
    pub data: DMatrix<f64>,
    pub oversample: usize,
}

impl NodeStateMatrix {
    pub fn n_intervals(&self) -> usize {
        self.data.ncols()
    }
}

/// Builds the time-multiplexed drive for one utterance.
///
/// Column `j` of the features is projected through the mask to `n_theta`
/// values; all masked values of the utterance are affinely rescaled to span
/// exactly `i_pp` peak to peak centered on zero (a degenerate spread, e.g.
/// silence, maps to a zero-offset drive), and every value is held for
/// `samples_per_theta` samples.
pub fn encode_drive(
    features: &FeatureMatrix,
    mask: &Mask,
    cfg: &EncodingConfig,
) -> Result<DriveWaveform> {
    cfg.validate()?;
    if mask.n_features() != features.n_channels() {
        return Err(Error::ShapeMismatch(format!(
            "mask expects {} feature channels, got {}",
            mask.n_features(),
            features.n_channels()
        )));
    }
    if mask.n_theta() != cfg.n_theta {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} slots, encoding wants {}",
            mask.n_theta(),
            cfg.n_theta
        )));
    }

    // One value per (slot, interval).
    let masked = mask.values().transpose() * features.data();
    let lo = masked.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = masked.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (scale, mid) = if hi > lo && cfg.i_pp > 0.0 {
        (cfg.i_pp / (hi - lo), (hi + lo) / 2.0)
    } else {
        (0.0, 0.0)
    };

    let n_tau = features.n_intervals();
    let mut samples = Vec::with_capacity(n_tau * cfg.samples_per_interval());
    for j in 0..n_tau {
        for i in 0..cfg.n_theta {
            let value = (masked[(i, j)] - mid) * scale;
            samples.extend(std::iter::repeat(value).take(cfg.samples_per_theta));
        }
    }
    DriveWaveform::new(samples, cfg.dt())
}

/// Reads node states back from an envelope trace.
///
/// For neuron `i` of interval `j` it records `oversample` consecutive
/// samples ending at the slot boundary `j * tau + (i + 1) * theta`, shifted
/// by `align_offset` (rounded to whole samples); rows are ordered neuron by
/// neuron, oldest sample first, and a bias row of ones is appended.
pub fn sample_nodes(
    trace: &EnvelopeTrace,
    cfg: &EncodingConfig,
    n_tau: usize,
) -> Result<NodeStateMatrix> {
    cfg.validate()?;
    if n_tau == 0 {
        return Err(Error::InvalidParameter("n_tau must be >= 1".into()));
    }
    let spt = cfg.samples_per_theta;
    let shift = (cfg.align_offset / trace.dt()).round() as i64;
    let first = spt as i64 - 1 - (cfg.oversample as i64 - 1) + shift;
    if first < 0 {
        return Err(Error::InvalidParameter(format!(
            "align_offset {} ns reaches before the trace start",
            cfg.align_offset
        )));
    }
    let last = (n_tau * cfg.n_theta * spt) as i64 - 1 + shift;
    if last as usize >= trace.len() {
        return Err(Error::TraceTooShort { needed: (last + 1) as usize, got: trace.len() });
    }

    let rows = cfg.n_state_rows();
    let mut data = DMatrix::zeros(rows, n_tau);
    let samples = trace.samples();
    for j in 0..n_tau {
        for i in 0..cfg.n_theta {
            let slot_end = ((j * cfg.n_theta + i + 1) * spt) as i64 - 1 + shift;
            for s in 0..cfg.oversample {
                let k = cfg.oversample - 1 - s; // steps back from the slot end
                let idx = (slot_end - k as i64) as usize;
                data[(i * cfg.oversample + s, j)] = samples[idx];
            }
        }
        data[(rows - 1, j)] = 1.0;
    }
    Ok(NodeStateMatrix { data, oversample: cfg.oversample })
}

/// Control variant that bypasses the oscillator: the recorded "states" are
/// the rescaled masked inputs themselves, i.e. the node samples of a
/// fictitious envelope that follows the drive exactly.
pub fn control_states(
    features: &FeatureMatrix,
    mask: &Mask,
    cfg: &EncodingConfig,
) -> Result<NodeStateMatrix> {
    let drive = encode_drive(features, mask, cfg)?;
    let trace = EnvelopeTrace::new(drive.samples().to_vec(), drive.dt())?;
    sample_nodes(&trace, cfg, features.n_intervals())
}

/// Writes node states as delimited text: dimensions in a commented header,
/// then one comma-separated row per state entry (bias row last).
pub fn write_states<W: Write>(mut out: W, states: &NodeStateMatrix) -> io::Result<()> {
    writeln!(out, "# stno node states v1")?;
    writeln!(out, "# rows: {}", states.data.nrows())?;
    writeln!(out, "# intervals: {}", states.data.ncols())?;
    writeln!(out, "# oversample: {}", states.oversample)?;
    for i in 0..states.data.nrows() {
        let row: Vec<String> = states.data.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
