//! The experiment configuration: one TOML document carrying every parameter
//! and every named seed, so that a config file plus the binary version pins
//! an experiment completely. Unknown keys are rejected at any nesting level,
//! and the core validators run again at load time.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stno_core::encoder::EncodingConfig;
use stno_core::oscillator::{BiasPoint, OscillatorParams};
use stno_core::seeds::derive_seed;
use stno_core::sweep::BiasGrid;
use stno_core::audio::FrontendKind;
use stno_core::tasks::{Mode, SineSquareOptions, SineSquareSeeds, SynthCorpusOptions};

pub const CONFIG_ENV: &str = "STNO_CONFIG";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub oscillator: OscillatorParams,
    pub corpus: CorpusBlock,
    pub encoding: EncodingBlock,
    pub task: TaskBlock,
    pub sweep: SweepBlock,
    pub simulate: SimulateBlock,
    pub paths: PathsBlock,
}

/// Synthetic-corpus shape; ignored when `paths.corpus_dir` points at a WAV
/// corpus on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusBlock {
    pub seed: u64,
    pub n_speakers: usize,
    pub n_utterances: u8,
    /// Hz.
    pub sample_rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingBlock {
    pub digits: EncodingConfig,
    pub sinesquare: EncodingConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBlock {
    pub digits: DigitsBlock,
    pub sinesquare: SineSquareBlock,
}

/// Which frontends a digit run covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontendChoice {
    Spectrogram,
    Cochlear,
    Both,
}

impl FrontendChoice {
    pub fn kinds(self) -> Vec<FrontendKind> {
        match self {
            FrontendChoice::Spectrogram => vec![FrontendKind::Spectrogram],
            FrontendChoice::Cochlear => vec![FrontendKind::Cochlear],
            FrontendChoice::Both => vec![FrontendKind::Spectrogram, FrontendKind::Cochlear],
        }
    }
}

impl fmt::Display for FrontendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FrontendChoice::Spectrogram => "spectrogram",
            FrontendChoice::Cochlear => "cochlear",
            FrontendChoice::Both => "both",
        };
        f.write_str(s)
    }
}

/// Which state modes a digit run covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Oscillator,
    Control,
    Both,
}

impl ModeChoice {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeChoice::Oscillator => vec![Mode::Oscillator],
            ModeChoice::Control => vec![Mode::Control],
            ModeChoice::Both => vec![Mode::Oscillator, Mode::Control],
        }
    }
}

impl fmt::Display for ModeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModeChoice::Oscillator => "oscillator",
            ModeChoice::Control => "control",
            ModeChoice::Both => "both",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigitsBlock {
    /// mA.
    pub i_dc: f64,
    /// mT.
    pub field: f64,
    pub ridge: f64,
    pub n_train_min: usize,
    pub n_train_max: usize,
    pub frontend: FrontendChoice,
    pub mode: ModeChoice,
    pub mask_seed: u64,
    pub noise_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineSquareBlock {
    /// mA.
    pub i_dc: f64,
    /// mT.
    pub field: f64,
    pub n_waveforms: usize,
    pub points_per_period: usize,
    pub ridge: f64,
    pub target_shifts: Vec<i32>,
    pub mask_seed: u64,
    pub label_seed: u64,
    pub noise_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub current_min: f64,
    pub current_max: f64,
    pub n_currents: usize,
    pub field_min: f64,
    pub field_max: f64,
    pub n_fields: usize,
    /// ns of constant-bias trace behind each delta_v estimate.
    pub noise_duration: f64,
}

impl SweepBlock {
    pub fn grid(&self) -> Result<BiasGrid> {
        let grid = BiasGrid::new(
            linspace(self.current_min, self.current_max, self.n_currents),
            linspace(self.field_min, self.field_max, self.n_fields),
        )?;
        Ok(grid)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    /// mA.
    pub i_dc: f64,
    /// mT.
    pub field: f64,
    /// ns.
    pub duration: f64,
    /// ns per integration step.
    pub dt: f64,
    /// mA amplitude of the built-in step probe.
    pub step: f64,
    pub noise_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsBlock {
    /// WAV corpus directory (with manifest.csv); synthetic corpus when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate().with_context(|| format!("validating config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.oscillator.validate()?;
        self.encoding.digits.validate()?;
        self.encoding.sinesquare.validate()?;
        self.digits_bias().validate()?;
        self.sinesquare_bias().validate()?;
        BiasPoint::new(self.simulate.i_dc, self.simulate.field).validate()?;
        self.sweep.grid()?;

        let d = &self.task.digits;
        let n_utt = self.corpus.n_utterances as usize;
        if d.n_train_min == 0 || d.n_train_min > d.n_train_max || d.n_train_max >= n_utt {
            bail!(
                "digit n_train range {}..={} must lie inside 1..={}",
                d.n_train_min,
                d.n_train_max,
                n_utt - 1
            );
        }
        let ss = &self.task.sinesquare;
        if ss.n_waveforms == 0 || ss.n_waveforms % 2 != 0 {
            bail!("sinesquare n_waveforms must be even and positive, got {}", ss.n_waveforms);
        }
        if ss.points_per_period < 2 {
            bail!("sinesquare points_per_period must be >= 2, got {}", ss.points_per_period);
        }
        if ss.target_shifts.is_empty() {
            bail!("sinesquare target_shifts must not be empty");
        }
        for (name, ridge) in [("digits", d.ridge), ("sinesquare", ss.ridge)] {
            if !ridge.is_finite() || ridge < 0.0 {
                bail!("{name} ridge must be finite and >= 0, got {ridge}");
            }
        }
        let sim = &self.simulate;
        if !(sim.duration > 0.0 && sim.dt > 0.0 && sim.duration >= sim.dt) {
            bail!("simulate duration/dt must be positive with duration >= dt");
        }
        if !sim.step.is_finite() {
            bail!("simulate step must be finite");
        }
        if !(self.sweep.noise_duration.is_finite() && self.sweep.noise_duration > 0.0) {
            bail!("sweep noise_duration must be positive");
        }
        Ok(())
    }

    /// Rederives every named seed from one master value, in a fixed order.
    /// Seeds stay below 2^63 so the resolved config remains representable
    /// as TOML integers.
    pub fn override_seeds(&mut self, master: u64) {
        let derive = |stream| derive_seed(master, stream) & (i64::MAX as u64);
        self.corpus.seed = derive(10);
        self.task.digits.mask_seed = derive(11);
        self.task.digits.noise_seed = derive(12);
        self.task.sinesquare.mask_seed = derive(13);
        self.task.sinesquare.label_seed = derive(14);
        self.task.sinesquare.noise_seed = derive(15);
        self.simulate.noise_seed = derive(16);
    }

    /// Hash of everything that can change emitted data: the whole config
    /// minus the output directory. First 16 hex digits of SHA-256 over the
    /// canonical TOML serialization.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths.out_dir = PathBuf::new();
        let text = toml::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn digits_bias(&self) -> BiasPoint {
        BiasPoint::new(self.task.digits.i_dc, self.task.digits.field)
    }

    pub fn sinesquare_bias(&self) -> BiasPoint {
        BiasPoint::new(self.task.sinesquare.i_dc, self.task.sinesquare.field)
    }

    pub fn sinesquare_options(&self) -> SineSquareOptions {
        let ss = &self.task.sinesquare;
        SineSquareOptions {
            n_waveforms: ss.n_waveforms,
            points_per_period: ss.points_per_period,
            ridge: ss.ridge,
            target_shifts: ss.target_shifts.clone(),
        }
    }

    pub fn sinesquare_seeds(&self) -> SineSquareSeeds {
        let ss = &self.task.sinesquare;
        SineSquareSeeds {
            mask_seed: ss.mask_seed,
            label_seed: ss.label_seed,
            noise_seed: ss.noise_seed,
        }
    }

    pub fn synth_options(&self) -> SynthCorpusOptions {
        SynthCorpusOptions {
            n_speakers: self.corpus.n_speakers,
            n_utterances: self.corpus.n_utterances,
            sample_rate: self.corpus.sample_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_config() -> ExperimentConfig {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
        ExperimentConfig::load(&path).unwrap()
    }

    #[test]
    fn default_config_loads_and_validates() {
        let cfg = default_config();
        assert_eq!(cfg.encoding.digits.n_theta, 400);
        assert_eq!(cfg.encoding.sinesquare.n_theta, 24);
        assert_eq!(cfg.corpus.n_utterances, 10);
        assert_eq!(cfg.sweep.grid().unwrap().len(), 169);
    }

    #[test]
    fn ci_config_only_shrinks_the_digit_encoder() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/ci.toml");
        let ci = ExperimentConfig::load(&path).unwrap();
        assert_eq!(ci.encoding.digits.n_theta, 100);
        let mut widened = ci.clone();
        widened.encoding.digits.n_theta = 400;
        assert_eq!(widened.hash(), default_config().hash());
    }

    #[test]
    fn unknown_keys_are_rejected_at_any_level() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
        let text = std::fs::read_to_string(path).unwrap();
        for (needle, extra) in [
            ("[oscillator]", "[oscillator]\nwarp = 1.0"),
            ("[task.digits]", "[task.digits]\nbogus = true"),
            ("[paths]", "[paths]\ntypo_dir = \"x\""),
        ] {
            let broken = text.replacen(needle, extra, 1);
            let err = toml::from_str::<ExperimentConfig>(&broken).unwrap_err();
            assert!(err.to_string().contains("unknown field"), "{err}");
        }
    }

    #[test]
    fn hash_ignores_out_dir_but_tracks_seeds() {
        let mut a = default_config();
        let mut b = default_config();
        b.paths.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        a.override_seeds(1);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn master_seed_fans_out_to_distinct_named_seeds() {
        let mut cfg = default_config();
        cfg.override_seeds(123);
        let mut seeds = vec![
            cfg.corpus.seed,
            cfg.task.digits.mask_seed,
            cfg.task.digits.noise_seed,
            cfg.task.sinesquare.mask_seed,
            cfg.task.sinesquare.label_seed,
            cfg.task.sinesquare.noise_seed,
            cfg.simulate.noise_seed,
        ];
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 7);
    }

    #[test]
    fn out_of_range_values_fail_validation() {
        let mut cfg = default_config();
        cfg.task.digits.n_train_max = 10;
        assert!(cfg.validate().is_err());
        let mut cfg = default_config();
        cfg.task.sinesquare.n_waveforms = 7;
        assert!(cfg.validate().is_err());
        let mut cfg = default_config();
        cfg.sweep.current_min = 9.0;
        assert!(cfg.validate().is_err());
    }
}
