//! Phenomenological amplitude model of a spin-torque nano-oscillator.
//!
//! The microwave envelope of the free-layer precession is reduced to one
//! scalar state: a bias-dependent steady state with a square-root onset above
//! the threshold current, first-order relaxation toward it, and an
//! Ornstein-Uhlenbeck amplitude noise whose strength peaks just above
//! threshold. Units throughout: currents in mA, fields in mT, times in ns,
//! amplitudes in mV.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::rng_from_seed;

/// Operating point: DC bias current (mA) and in-plane field (mT).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasPoint {
    pub i_dc: f64,
    pub field: f64,
}

impl BiasPoint {
    pub fn new(i_dc: f64, field: f64) -> Self {
        BiasPoint { i_dc, field }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.i_dc.is_finite() || !self.field.is_finite() {
            return Err(Error::NonFinite("bias point".into()));
        }
        Ok(())
    }
}

/// Device constants of the amplitude model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorParams {
    /// Threshold current (mA) at `field_ref`.
    pub i_th_ref: f64,
    /// Field (mT) at which `i_th_ref` and `gain_ref` are quoted.
    pub field_ref: f64,
    /// Relative threshold shift per relative field detuning.
    pub alpha_th: f64,
    /// Amplitude gain (mV per sqrt mA) at `field_ref`.
    pub gain_ref: f64,
    /// Relative gain reduction per relative field detuning.
    pub beta_gain: f64,
    /// Amplitude relaxation time (ns).
    pub tau_relax: f64,
    /// Amplitude noise floor (mV).
    pub sigma_floor: f64,
    /// Extra amplitude noise (mV) at threshold.
    pub sigma_peak: f64,
    /// Current half-width (mA) of the noise peak above threshold.
    pub i_width: f64,
    /// Correlation time (ns) of the amplitude noise.
    pub tau_noise: f64,
    /// Detector ceiling (mV); no envelope sample exceeds it.
    pub v_sat: f64,
}

impl OscillatorParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("i_th_ref", self.i_th_ref),
            ("field_ref", self.field_ref),
            ("alpha_th", self.alpha_th),
            ("gain_ref", self.gain_ref),
            ("beta_gain", self.beta_gain),
            ("tau_relax", self.tau_relax),
            ("sigma_floor", self.sigma_floor),
            ("sigma_peak", self.sigma_peak),
            ("i_width", self.i_width),
            ("tau_noise", self.tau_noise),
            ("v_sat", self.v_sat),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("oscillator.{name}")));
            }
        }
        for (name, v) in [
            ("field_ref", self.field_ref),
            ("tau_relax", self.tau_relax),
            ("tau_noise", self.tau_noise),
            ("i_width", self.i_width),
            ("v_sat", self.v_sat),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("oscillator.{name} must be > 0")));
            }
        }
        for (name, v) in [
            ("i_th_ref", self.i_th_ref),
            ("gain_ref", self.gain_ref),
            ("sigma_floor", self.sigma_floor),
            ("sigma_peak", self.sigma_peak),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("oscillator.{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Current offsets (mA) around the DC bias, one per time step of `dt` ns.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveWaveform {
    samples: Vec<f64>,
    dt: f64,
}

impl DriveWaveform {
    /// Builds a drive, rejecting non-finite samples and non-positive `dt`.
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!("drive dt must be > 0, got {dt}")));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("drive samples".into()));
        }
        Ok(DriveWaveform { samples, dt })
    }

    pub fn constant(offset: f64, len: usize, dt: f64) -> Result<Self> {
        DriveWaveform::new(vec![offset; len], dt)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total duration in ns.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

/// Envelope amplitude (mV) sampled on the same grid as the drive that
/// produced it. `samples[n]` is the amplitude after integrating the n-th
/// drive sample, i.e. at time `(n + 1) * dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeTrace {
    samples: Vec<f64>,
    dt: f64,
}

impl EnvelopeTrace {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!("trace dt must be > 0, got {dt}")));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("trace samples".into()));
        }
        Ok(EnvelopeTrace { samples, dt })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

/// Field-dependent threshold current (mA), affine in the relative detuning
/// from the reference field.
pub fn threshold_current(params: &OscillatorParams, field: f64) -> f64 {
    params.i_th_ref * (1.0 + params.alpha_th * (field - params.field_ref) / params.field_ref)
}

/// Zero-noise steady-state envelope amplitude (mV): square-root onset above
/// threshold, clipped at the detector ceiling. Exactly zero at and below
/// threshold.
pub fn steady_state_amplitude(params: &OscillatorParams, i_dc: f64, field: f64) -> f64 {
    let gain =
        params.gain_ref * (1.0 - params.beta_gain * (field - params.field_ref) / params.field_ref);
    let v = gain * (i_dc - threshold_current(params, field)).max(0.0).sqrt();
    v.clamp(0.0, params.v_sat)
}

/// Stationary amplitude-noise strength (mV): a Lorentzian bump just above
/// threshold riding on the floor; the floor alone at and below threshold.
pub fn noise_std(params: &OscillatorParams, bias: BiasPoint) -> f64 {
    let excess = bias.i_dc - threshold_current(params, bias.field);
    if excess > 0.0 {
        params.sigma_floor + params.sigma_peak / (1.0 + (excess / params.i_width).powi(2))
    } else {
        params.sigma_floor
    }
}

/// Integrates the envelope under a drive.
///
/// Explicit Euler at the drive's `dt` for
/// `tau_relax * dv/dt = -v + v_ss(i_dc + drive(t), field) + eta(t)`,
/// starting from `v_ss` at the bare bias. `eta` is an Ornstein-Uhlenbeck
/// input with correlation time `tau_noise`, stepped with its exact
/// discrete-time coefficients and scaled so the stationary std of the *trace*
/// equals `noise_std(bias)` (the relaxation acts as a low-pass on `eta`, so
/// the injected std is larger by `sqrt((tau_relax + tau_noise) / tau_noise)`).
/// Every sample is clamped to `[0, v_sat]`. The result is a pure function of
/// `(params, bias, drive, seed)`.
pub fn simulate_envelope(
    params: &OscillatorParams,
    bias: BiasPoint,
    drive: &DriveWaveform,
    seed: u64,
) -> Result<EnvelopeTrace> {
    params.validate()?;
    bias.validate()?;

    let dt = drive.dt();
    let step = dt / params.tau_relax;
    let sigma_trace = noise_std(params, bias);
    let sigma_eta = sigma_trace * ((params.tau_relax + params.tau_noise) / params.tau_noise).sqrt();
    let rho = (-dt / params.tau_noise).exp();
    let eta_step = sigma_eta * (1.0 - rho * rho).sqrt();

    let mut rng = rng_from_seed(seed);
    let mut eta = if sigma_eta > 0.0 {
        sigma_eta * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };

    let mut v = steady_state_amplitude(params, bias.i_dc, bias.field);
    let mut out = Vec::with_capacity(drive.len());
    for &offset in drive.samples() {
        let v_ss = steady_state_amplitude(params, bias.i_dc + offset, bias.field);
        v += step * (v_ss - v + eta);
        v = v.clamp(0.0, params.v_sat);
        out.push(v);
        if sigma_eta > 0.0 {
            eta = rho * eta + eta_step * rng.sample::<f64, _>(StandardNormal);
        }
    }

    EnvelopeTrace::new(out, dt)
}
