//! Fast invariant suite behind `stno validate`: recomputes the core model
//! guarantees from scratch (no fixtures) so a misconfigured build or a
//! miscompiled numeric kernel fails loudly before any long experiment.

use nalgebra::DMatrix;
use rand::Rng;

use stno_core::oscillator::{
    simulate_envelope, steady_state_amplitude, threshold_current, BiasPoint, DriveWaveform,
    OscillatorParams,
};
use stno_core::readout::{reconstruct_outputs, train_weights, train_weights_gram};
use stno_core::seeds::rng_from_seed;
use stno_core::tasks::enumerate_splits;

use crate::config::ExperimentConfig;
use crate::report::fnum;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_all(cfg: &ExperimentConfig) -> Vec<Check> {
    vec![
        square_root_law(&cfg.oscillator),
        relaxation_fit(cfg),
        pseudoinverse(),
        split_counts(cfg.corpus.n_utterances),
    ]
}

/// Least-squares line through (x, y); returns (slope, intercept, r_squared).
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 =
        x.iter().zip(y).map(|(a, b)| (b - (slope * a + intercept)).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

/// Amplitude-squared must be linear in current between threshold and the
/// detector ceiling, and exactly zero at threshold.
fn square_root_law(params: &OscillatorParams) -> Check {
    let field = params.field_ref;
    let i_th = threshold_current(params, field);
    let i_clip = i_th + (params.v_sat / params.gain_ref).powi(2);
    let span = 0.9 * (i_clip - i_th);
    let currents: Vec<f64> = (1..=50).map(|k| i_th + span * k as f64 / 50.0).collect();
    let squares: Vec<f64> = currents
        .iter()
        .map(|&i| steady_state_amplitude(params, i, field).powi(2))
        .collect();
    let (_, _, r2) = fit_line(&currents, &squares);
    let at_threshold = steady_state_amplitude(params, i_th, field);
    let passed = r2 > 0.9999 && at_threshold == 0.0;
    Check {
        name: "square_root_law",
        passed,
        detail: format!("R2 {} over 50 currents; V(I_th) {}", fnum(r2), fnum(at_threshold)),
    }
}

/// A noiseless step response must decay with the configured tau_relax.
fn relaxation_fit(cfg: &ExperimentConfig) -> Check {
    let mut quiet = cfg.oscillator;
    quiet.sigma_floor = 0.0;
    quiet.sigma_peak = 0.0;
    let sim = &cfg.simulate;
    let bias = BiasPoint::new(sim.i_dc, sim.field);
    let tau = quiet.tau_relax;
    let fail = |detail: String| Check { name: "relaxation_fit", passed: false, detail };

    let v_from = steady_state_amplitude(&quiet, bias.i_dc, bias.field);
    let v_to = steady_state_amplitude(&quiet, bias.i_dc + sim.step, bias.field);
    if (v_to - v_from).abs() < 1e-6 {
        return fail("step probe does not move the steady state".into());
    }
    if v_to >= 0.999 * quiet.v_sat {
        return fail("step lands on the detector ceiling; lower simulate.step".into());
    }

    let n = (3.0 * tau / sim.dt).ceil() as usize;
    let drive = match DriveWaveform::constant(sim.step, n, sim.dt) {
        Ok(d) => d,
        Err(e) => return fail(e.to_string()),
    };
    let trace = match simulate_envelope(&quiet, bias, &drive, 0) {
        Ok(t) => t,
        Err(e) => return fail(e.to_string()),
    };

    // ln|v_inf - v(t)| is linear in t with slope -1/tau.
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (k, &v) in trace.samples().iter().enumerate() {
        let t = (k + 1) as f64 * sim.dt;
        let gap = (v_to - v).abs();
        if t > 2.0 * tau || gap < 1e-9 * (v_to - v_from).abs() {
            break;
        }
        ts.push(t);
        logs.push(gap.ln());
    }
    if ts.len() < 10 {
        return fail("too few samples before the step settled".into());
    }
    let (slope, _, _) = fit_line(&ts, &logs);
    let tau_fit = -1.0 / slope;
    let rel = (tau_fit / tau - 1.0).abs();
    Check {
        name: "relaxation_fit",
        passed: rel <= 0.02,
        detail: format!("fitted tau {} ns vs configured {} ns ({} relative)", fnum(tau_fit), fnum(tau), fnum(rel)),
    }
}

/// The two readout code paths (SVD on states, eigendecomposition on the
/// Gram matrix) must agree on the residual, and no perturbation of the
/// weights may beat it.
fn pseudoinverse() -> Check {
    let mut rng = rng_from_seed(314_159);
    let mut worst_gap = 0.0f64;
    for instance in 0..10 {
        let rows = rng.gen_range(3..=50);
        let cols = rng.gen_range(rows..=200);
        let outputs = rng.gen_range(1..=10);
        let mut s = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
        if instance % 2 == 1 {
            let dup = s.row(0).into_owned();
            s.set_row(rows - 1, &dup);
        }
        let y = DMatrix::from_fn(outputs, cols, |_, _| rng.gen_range(-1.0..1.0));

        let direct = match train_weights(&s, &y, 0.0) {
            Ok(w) => w,
            Err(e) => return pseudoinverse_fail(e.to_string()),
        };
        let via_gram =
            match train_weights_gram(&(&s * s.transpose()), &(&y * s.transpose()), cols, 0.0) {
                Ok(w) => w,
                Err(e) => return pseudoinverse_fail(e.to_string()),
            };
        let r_direct = match reconstruct_outputs(&direct, &s) {
            Ok(out) => (&y - out).norm(),
            Err(e) => return pseudoinverse_fail(e.to_string()),
        };
        let r_gram = match reconstruct_outputs(&via_gram, &s) {
            Ok(out) => (&y - out).norm(),
            Err(e) => return pseudoinverse_fail(e.to_string()),
        };
        let gap = (r_direct - r_gram).abs() / (1.0 + r_direct);
        worst_gap = worst_gap.max(gap);
        if gap > 1e-8 {
            return pseudoinverse_fail(format!(
                "residual mismatch {} between code paths at instance {instance}",
                fnum(gap)
            ));
        }

        let scale = 1e-3 * (1.0 + direct.matrix.norm());
        for _ in 0..20 {
            let noise = DMatrix::from_fn(outputs, rows, |_, _| rng.gen_range(-1.0..1.0));
            let perturbed = (&y - (&direct.matrix + scale * noise) * &s).norm();
            if perturbed < r_direct - 1e-9 * (1.0 + r_direct) {
                return pseudoinverse_fail(format!(
                    "perturbation beat the least-squares residual at instance {instance}"
                ));
            }
        }
    }
    Check {
        name: "pseudoinverse",
        passed: true,
        detail: format!("10 instances incl. rank-deficient; worst path gap {}", fnum(worst_gap)),
    }
}

fn pseudoinverse_fail(detail: String) -> Check {
    Check { name: "pseudoinverse", passed: false, detail }
}

fn split_counts(n_utterances: u8) -> Check {
    let n = n_utterances as usize;
    let mut counts = Vec::new();
    for n_train in 1..n {
        let splits = match enumerate_splits(n_utterances, n_train) {
            Ok(s) => s,
            Err(e) => {
                return Check { name: "split_counts", passed: false, detail: e.to_string() }
            }
        };
        let distinct: std::collections::HashSet<&[u8]> =
            splits.iter().map(|p| p.train.as_slice()).collect();
        let expected = binomial(n, n_train);
        if splits.len() != expected || distinct.len() != expected {
            return Check {
                name: "split_counts",
                passed: false,
                detail: format!(
                    "n_train {n_train}: {} splits ({} distinct) vs binomial {expected}",
                    splits.len(),
                    distinct.len()
                ),
            };
        }
        counts.push(splits.len().to_string());
    }
    Check {
        name: "split_counts",
        passed: true,
        detail: format!("counts {} match the binomials", counts.join(" ")),
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let mut c = 1usize;
    for j in 0..k {
        c = c * (n - j) / (j + 1);
    }
    c
}
