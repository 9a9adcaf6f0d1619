//! Spoken-digit corpus on disk: `manifest.csv` plus one 16-bit mono WAV per
//! utterance.
//!
//! The manifest has the columns `file,digit,speaker,utterance`. A loaded
//! corpus is kept in canonical order (digit, then speaker, then utterance
//! index) and must be slot complete: every digit 0-9 carries the same
//! speakers, and every (digit, speaker) pair carries utterances `1..=U` for
//! one corpus-wide `U`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::AudioSignal;
use crate::error::{Error, Result};

const MANIFEST: &str = "manifest.csv";
const PCM_SCALE: f64 = 32_768.0;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    file: String,
    digit: u8,
    speaker: String,
    utterance: u8,
}

/// A complete, canonically ordered spoken-digit corpus.
#[derive(Clone, Debug)]
pub struct Corpus {
    signals: Vec<AudioSignal>,
    speakers: Vec<String>,
    n_utterances: u8,
}

impl Corpus {
    /// Sorts, validates and indexes a set of utterances.
    pub fn from_signals(mut signals: Vec<AudioSignal>) -> Result<Corpus> {
        if signals.is_empty() {
            return Err(Error::Corpus("empty corpus".into()));
        }
        for s in &signals {
            s.validate()?;
        }
        signals.sort_by(|a, b| {
            (a.digit, &a.speaker, a.utterance).cmp(&(b.digit, &b.speaker, b.utterance))
        });
        for w in signals.windows(2) {
            if (w[0].digit, &w[0].speaker, w[0].utterance)
                == (w[1].digit, &w[1].speaker, w[1].utterance)
            {
                return Err(Error::Corpus(format!(
                    "duplicate utterance: digit {}, speaker {}, index {}",
                    w[0].digit, w[0].speaker, w[0].utterance
                )));
            }
        }
        let mut speakers: Vec<String> = signals.iter().map(|s| s.speaker.clone()).collect();
        speakers.sort();
        speakers.dedup();
        let n_utterances = signals.iter().map(|s| s.utterance).max().unwrap();
        let keys: Vec<(u8, &str, u8)> =
            signals.iter().map(|s| (s.digit, s.speaker.as_str(), s.utterance)).collect();
        for digit in 0..10u8 {
            for speaker in &speakers {
                for utterance in 1..=n_utterances {
                    if keys.binary_search(&(digit, speaker.as_str(), utterance)).is_err() {
                        return Err(Error::Corpus(format!(
                            "missing utterance: digit {digit}, speaker {speaker}, index {utterance}"
                        )));
                    }
                }
            }
        }
        // Unique keys covering the full grid leave no room for strays.
        debug_assert_eq!(signals.len(), 10 * speakers.len() * n_utterances as usize);
        Ok(Corpus { signals, speakers, n_utterances })
    }

    pub fn signals(&self) -> &[AudioSignal] {
        &self.signals
    }

    pub fn speakers(&self) -> &[String] {
        &self.speakers
    }

    pub fn n_utterances(&self) -> u8 {
        self.n_utterances
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// Direct slot lookup in the canonical layout.
    pub fn get(&self, digit: u8, speaker_idx: usize, utterance: u8) -> &AudioSignal {
        let idx = (digit as usize * self.speakers.len() + speaker_idx)
            * self.n_utterances as usize
            + utterance as usize
            - 1;
        let s = &self.signals[idx];
        debug_assert_eq!(
            (s.digit, s.speaker.as_str(), s.utterance),
            (digit, self.speakers[speaker_idx].as_str(), utterance)
        );
        s
    }
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Corpus(format!("{}: {other}", path.display())),
    }
}

fn read_wav(path: &Path) -> Result<(Vec<f64>, f64)> {
    let reader = WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16
    {
        return Err(Error::Corpus(format!(
            "{}: expected 16-bit mono PCM, got {} ch / {} bit",
            path.display(),
            spec.channels,
            spec.bits_per_sample
        )));
    }
    let rate = spec.sample_rate as f64;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / PCM_SCALE))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| wav_error(path, e))?;
    Ok((samples, rate))
}

/// Loads the corpus under `dir` (manifest plus WAV files).
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let manifest = dir.join(MANIFEST);
    let mut reader = csv::Reader::from_path(&manifest).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&manifest, io),
        other => Error::Corpus(format!("{}: {other:?}", manifest.display())),
    })?;
    let mut signals = Vec::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let line = i + 2; // header occupied line 1
        let row = row.map_err(|e| Error::parse(&manifest, line, e.to_string()))?;
        let path = dir.join(&row.file);
        let (samples, sample_rate) = read_wav(&path)?;
        let signal = AudioSignal {
            samples,
            sample_rate,
            digit: row.digit,
            speaker: row.speaker,
            utterance: row.utterance,
        };
        signal.validate().map_err(|e| Error::parse(&manifest, line, e.to_string()))?;
        signals.push(signal);
    }
    Corpus::from_signals(signals)
}

/// Writes signals as a corpus directory; file names encode the slot.
pub fn write_corpus(dir: &Path, signals: &[AudioSignal]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = dir.join(MANIFEST);
    let mut writer = csv::Writer::from_path(&manifest).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&manifest, io),
        other => Error::Corpus(format!("{}: {other:?}", manifest.display())),
    })?;
    for s in signals {
        s.validate()?;
        let file = format!("d{}_{}_u{:02}.wav", s.digit, s.speaker, s.utterance);
        let path = dir.join(&file);
        write_wav(&path, s)?;
        writer
            .serialize(ManifestRow {
                file,
                digit: s.digit,
                speaker: s.speaker.clone(),
                utterance: s.utterance,
            })
            .map_err(|e| Error::Corpus(format!("{}: {e}", manifest.display())))?;
    }
    writer.flush().map_err(|e| Error::io(&manifest, e))?;
    Ok(())
}

fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate.round() as u32,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer =
        WavWriter::new(BufWriter::new(file), spec).map_err(|e| wav_error(path, e))?;
    for &v in &signal.samples {
        let q = (v * PCM_SCALE).round().clamp(-PCM_SCALE, PCM_SCALE - 1.0) as i16;
        writer.write_sample(q).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))?;
    Ok(())
}
