//! Bias-plane sweep: runs the sine/square probe task over an
//! (I_DC, field) grid and extracts the response/noise figures of merit
//! used to map where the oscillator computes well.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::EncodingConfig;
use crate::error::{Error, Result};
use crate::oscillator::{
    simulate_envelope, steady_state_amplitude, threshold_current, BiasPoint,
    DriveWaveform, EnvelopeTrace, OscillatorParams,
};
use crate::tasks::{run_sine_square, SineSquareOptions, SineSquareSeeds};
use crate::seeds::derive_seed;

/// Grid axes, both strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasGrid {
    pub currents: Vec<f64>,
    pub fields: Vec<f64>,
}

impl BiasGrid {
    pub fn new(currents: Vec<f64>, fields: Vec<f64>) -> Result<Self> {
        let grid = BiasGrid { currents, fields };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("currents", &self.currents), ("fields", &self.fields)] {
            if axis.is_empty() {
                return Err(Error::InvalidParameter(format!("empty {name} axis")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{name} axis")));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "{name} axis must be strictly increasing"
                )));
            }
        }
        Ok(())
    }

    /// 13 x 13 cells over 5-8 mA and 250-550 mT.
    pub fn default_grid() -> Self {
        BiasGrid {
            currents: (0..13).map(|k| 5.0 + 0.25 * k as f64).collect(),
            fields: (0..13).map(|k| 250.0 + 25.0 * k as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.currents.len() * self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.currents.is_empty() || self.fields.is_empty()
    }
}

/// Everything measured at one bias point. The fom fields are redundant
/// (recomputed from the primaries) and exist for export only.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub bias: BiasPoint,
    pub v_up: f64,
    pub v_dw: f64,
    pub delta_v: f64,
    pub rms: f64,
    pub errors: usize,
    pub fom_amp: f64,
    pub fom_noise: f64,
    pub fom_total: f64,
}

/// Sweep knobs beyond the task itself.
#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub task: SineSquareOptions,
    /// Simulated time (ns) of the constant-bias run behind `delta_v`. The
    /// envelope decorrelates over `tau_relax`, not `tau_noise`, so a stable
    /// std needs a few hundred `tau_relax`; the default gives ~5 % error.
    pub noise_duration: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { task: SineSquareOptions::default(), noise_duration: 200_000.0 }
    }
}

/// Largest excursions of a driven trace above and below the steady-state
/// baseline, both reported as nonnegative magnitudes.
pub fn extract_response_extremes(trace: &EnvelopeTrace, baseline: f64) -> (f64, f64) {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &v in trace.samples() {
        max = max.max(v);
        min = min.min(v);
    }
    ((max - baseline).max(0.0), (baseline - min).max(0.0))
}

/// Sample standard deviation of a constant-bias trace after discarding the
/// first `5 * tau_relax` of transient.
pub fn extract_noise(trace: &EnvelopeTrace, params: &OscillatorParams) -> Result<f64> {
    let needed = 5.0 * params.tau_relax + 50.0 * params.tau_noise;
    if trace.duration() < needed {
        return Err(Error::TraceTooShort {
            needed: (needed / trace.dt()).ceil() as usize,
            got: trace.len(),
        });
    }
    let skip = (5.0 * params.tau_relax / trace.dt()).ceil() as usize;
    let kept = &trace.samples()[skip..];
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = kept.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

/// Runs the probe task and the noise measurement at every grid cell.
///
/// Cells are row-major over (current, field). Below-threshold cells skip
/// the probe entirely (no oscillation, no computation) and report
/// `v_up = v_dw = 0` with chance-level task numbers. Each cell draws its
/// two noise seeds from `seeds.noise_seed` and its own index, so the map
/// does not depend on evaluation order.
pub fn run_sweep(
    grid: &BiasGrid,
    params: &OscillatorParams,
    cfg: &EncodingConfig,
    opts: &SweepOptions,
    seeds: SineSquareSeeds,
) -> Result<Vec<SweepCell>> {
    grid.validate()?;
    params.validate()?;
    cfg.validate()?;
    if opts.noise_duration < 5.0 * params.tau_relax + 50.0 * params.tau_noise {
        return Err(Error::InvalidParameter(format!(
            "noise_duration {} ns is too short for a stable std estimate",
            opts.noise_duration
        )));
    }

    let points: Vec<(usize, BiasPoint)> = grid
        .currents
        .iter()
        .flat_map(|&i| grid.fields.iter().map(move |&h| BiasPoint::new(i, h)))
        .enumerate()
        .collect();

    points
        .into_par_iter()
        .map(|(idx, bias)| {
            let cell_seeds = SineSquareSeeds {
                noise_seed: derive_seed(seeds.noise_seed, 2 * idx as u64),
                ..seeds
            };
            measure_cell(bias, params, cfg, opts, cell_seeds, derive_seed(seeds.noise_seed, 2 * idx as u64 + 1))
        })
        .collect()
}

fn measure_cell(
    bias: BiasPoint,
    params: &OscillatorParams,
    cfg: &EncodingConfig,
    opts: &SweepOptions,
    task_seeds: SineSquareSeeds,
    noise_run_seed: u64,
) -> Result<SweepCell> {
    let baseline = steady_state_amplitude(params, bias.i_dc, bias.field);
    let above_threshold = bias.i_dc > threshold_current(params, bias.field);

    let (v_up, v_dw, rms, errors) = if above_threshold {
        let run = run_sine_square(&opts.task, cfg, params, bias, task_seeds)?;
        let (up, dw) = extract_response_extremes(&run.trace, baseline);
        (up, dw, run.report.rms_test, run.report.misclassified)
    } else {
        (0.0, 0.0, 0.5, opts.task.n_waveforms / 4)
    };

    let dt = cfg.dt();
    let n = (opts.noise_duration / dt).ceil() as usize;
    let quiet = simulate_envelope(params, bias, &DriveWaveform::constant(0.0, n, dt)?, noise_run_seed)?;
    let delta_v = extract_noise(&quiet, params)?;

    let fom_amp = v_up * v_dw;
    let fom_noise = if delta_v > 0.0 { 1.0 / delta_v } else { 0.0 };
    Ok(SweepCell {
        bias,
        v_up,
        v_dw,
        delta_v,
        rms,
        errors,
        fom_amp,
        fom_noise,
        fom_total: fom_amp * fom_noise,
    })
}

/// Spearman rank correlation with tie-averaged ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} samples", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numerical("constant input has no rank correlation".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}
