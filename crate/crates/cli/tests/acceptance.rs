//! Release acceptance suite: one test per criterion, each ending in a single
//! PASS/FAIL line (visible with `--nocapture`; the harness line carries the
//! same verdict). Every quantitative check runs at the tolerances stated in
//! the criterion, on the shipped default configuration.
//!
//! Criterion 4 is expected red: its error-count clause holds with margin, but
//! the pointwise RMS bound sits below what a first-order envelope model can
//! reach. The assertion message and the readme give the analysis; the test is
//! left failing rather than loosened.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

use stno_core::audio::FrontendKind;
use stno_core::encoder::{make_mask, EncodingConfig};
use stno_core::oscillator::{
    simulate_envelope, steady_state_amplitude, threshold_current, BiasPoint, DriveWaveform,
    OscillatorParams,
};
use stno_core::readout::train_weights;
use stno_core::sweep::{run_sweep, spearman, BiasGrid, SweepOptions};
use stno_core::tasks::{
    enumerate_splits, prepare_digit_states, run_sine_square, synth_corpus, run_spoken_digits,
    DigitTaskSetup, Mode, SineSquareOptions, SineSquareSeeds, SynthCorpusOptions,
};

// ---------------------------------------------------------------------------
// shared plumbing

/// The slices of the shipped default config that the criteria run on.
#[derive(Deserialize)]
struct Defaults {
    oscillator: OscillatorParams,
    corpus: CorpusSlice,
    encoding: EncodingSlice,
    task: TaskSlice,
    sweep: SweepSlice,
}

#[derive(Deserialize)]
struct CorpusSlice {
    seed: u64,
    n_speakers: usize,
    n_utterances: u8,
    sample_rate: f64,
}

#[derive(Deserialize)]
struct EncodingSlice {
    digits: EncodingConfig,
    sinesquare: EncodingConfig,
}

#[derive(Deserialize)]
struct TaskSlice {
    digits: DigitsSlice,
    sinesquare: SineSquareSlice,
}

#[derive(Deserialize)]
struct DigitsSlice {
    i_dc: f64,
    field: f64,
    ridge: f64,
    mask_seed: u64,
    noise_seed: u64,
}

#[derive(Deserialize)]
struct SineSquareSlice {
    i_dc: f64,
    field: f64,
    n_waveforms: usize,
    points_per_period: usize,
    ridge: f64,
    target_shifts: Vec<i32>,
    mask_seed: u64,
    label_seed: u64,
    noise_seed: u64,
}

#[derive(Deserialize)]
struct SweepSlice {
    current_min: f64,
    current_max: f64,
    n_currents: usize,
    field_min: f64,
    field_max: f64,
    n_fields: usize,
    noise_duration: f64,
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config")
}

fn defaults() -> Defaults {
    let path = config_dir().join("default.toml");
    let text = std::fs::read_to_string(&path).expect("reading default config");
    toml::from_str(&text).expect("parsing default config")
}

fn quiet(params: &OscillatorParams) -> OscillatorParams {
    OscillatorParams { sigma_floor: 0.0, sigma_peak: 0.0, ..params.clone() }
}

/// Prints the criterion's verdict line, then enforces it.
fn verdict(criterion: &str, passed: bool, detail: &str) {
    println!("criterion {criterion}: {} ({detail})", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {criterion}: {detail}");
}

/// Least-squares line fit returning (slope, intercept, r^2).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 =
        x.iter().zip(y).map(|(a, b)| (b - (slope * a + intercept)).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    (slope, intercept, 1.0 - ss_res / ss_tot)
}

// ---------------------------------------------------------------------------
// criteria

#[test]
fn criterion_1_square_root_onset() {
    let p = quiet(&defaults().oscillator);
    let field = p.field_ref;
    let i_th = threshold_current(&p, field);
    let i_sat = i_th + (p.v_sat / p.gain_ref).powi(2);

    // Settle from a fixed mid-range start so the integrator, not the closed
    // form, produces each amplitude. 12 relaxation times per point.
    let i_mid = i_th + 5.0;
    let n = (12.0 * p.tau_relax / 2.0) as usize;
    let settled = |i_dc: f64| {
        let drive = DriveWaveform::constant(i_dc - i_mid, n, 2.0).unwrap();
        let trace = simulate_envelope(&p, BiasPoint::new(i_mid, field), &drive, 0).unwrap();
        *trace.samples().last().unwrap()
    };

    let currents: Vec<f64> = (0..50)
        .map(|k| i_th + 0.95 * (i_sat - i_th) * (k + 1) as f64 / 50.0)
        .collect();
    let v_sq: Vec<f64> = currents.iter().map(|&i| settled(i).powi(2)).collect();
    let (_, _, r2) = linear_fit(&currents, &v_sq);

    let v_at_threshold = steady_state_amplitude(&p, i_th, field);
    let flat = DriveWaveform::constant(0.0, 500, 2.0).unwrap();
    let trace = simulate_envelope(&p, BiasPoint::new(i_th, field), &flat, 0).unwrap();
    let max_on_trace = trace.samples().iter().cloned().fold(0.0f64, f64::max);

    let passed = r2 > 0.9999 && v_at_threshold == 0.0 && max_on_trace == 0.0;
    verdict(
        "1 square-root onset",
        passed,
        &format!(
            "R^2 of V^2 vs I over 50 currents = {r2:.10}; V(I_th) = {v_at_threshold} \
             and the simulated envelope at threshold stays at {max_on_trace}"
        ),
    );
}

#[test]
fn criterion_2_relaxation_memory() {
    let d = defaults();
    let p = quiet(&d.oscillator);
    let bias = BiasPoint::new(7.0, p.field_ref);
    let dt = 2.0;
    let n = (6.0 * p.tau_relax / dt) as usize;

    // Constant +1 mA drive: the trace relaxes from v_ss(7.0) toward v_ss(8.0).
    let drive = DriveWaveform::constant(1.0, n, dt).unwrap();
    let trace = simulate_envelope(&p, bias, &drive, 0).unwrap();
    let v_inf = steady_state_amplitude(&p, bias.i_dc + 1.0, bias.field);

    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (k, &v) in trace.samples().iter().enumerate() {
        let t = (k + 1) as f64 * dt;
        let gap = v_inf - v;
        if t > 2.0 * p.tau_relax || gap <= 0.0 {
            break;
        }
        ts.push(t);
        logs.push(gap.ln());
    }
    let (slope, _, r2) = linear_fit(&ts, &logs);
    let tau_fit = -1.0 / slope;
    let err = (tau_fit - p.tau_relax).abs() / p.tau_relax;

    verdict(
        "2 relaxation memory",
        err < 0.02,
        &format!(
            "fitted tau = {tau_fit:.1} ns vs configured {} ns ({:.2} % off, fit R^2 {r2:.8})",
            p.tau_relax,
            100.0 * err
        ),
    );
}

#[test]
fn criterion_3_readout_optimality() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2_718_281);
    let mut worst_gap = 0.0f64;
    let mut perturbations = 0usize;
    let mut improvements = 0usize;

    for instance in 0..20 {
        let rows = rng.gen_range(3..=50);
        let cols = rng.gen_range(rows..=200);
        let outputs = rng.gen_range(1..=10);
        let mut s = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
        if instance % 3 == 0 {
            let top = s.row(0).into_owned();
            s.set_row(1, &top); // duplicated feature row
        }
        if instance % 4 == 0 {
            s.fill_row(rows - 1, 0.0); // dead feature row
        }
        let y = DMatrix::from_fn(outputs, cols, |_, _| rng.gen_range(-1.0..1.0));

        let w = train_weights(&s, &y, 0.0).unwrap();
        let r_core = (&w.matrix * &s - &y).norm();

        let s_mat: Vec<Vec<f64>> = (0..rows).map(|i| s.row(i).iter().cloned().collect()).collect();
        let y_mat: Vec<Vec<f64>> =
            (0..outputs).map(|i| y.row(i).iter().cloned().collect()).collect();
        let w_svd = stno_oracles::lstsq_min_norm(&s_mat, &y_mat);
        let r_svd = stno_oracles::residual_fro(&w_svd, &s_mat, &y_mat);
        worst_gap = worst_gap.max((r_core - r_svd).abs() / (1.0 + r_svd));
        if instance % 3 != 0 && instance % 4 != 0 {
            if let Some(w_ne) = stno_oracles::normal_equations_weights(&s_mat, &y_mat, 0.0) {
                let r_ne = stno_oracles::residual_fro(&w_ne, &s_mat, &y_mat);
                worst_gap = worst_gap.max((r_core - r_ne).abs() / (1.0 + r_ne));
            }
        }

        let scale = 1e-3 * (1.0 + w.matrix.norm());
        for _ in 0..5 {
            let noise =
                DMatrix::from_fn(outputs, rows, |_, _| rng.gen_range(-1.0..1.0) * scale);
            let r_pert = ((&w.matrix + noise) * &s - &y).norm();
            perturbations += 1;
            if r_pert < r_core - 1e-9 * (1.0 + r_core) {
                improvements += 1;
            }
        }
    }

    let passed = worst_gap <= 1e-8 && improvements == 0;
    verdict(
        "3 readout optimality",
        passed,
        &format!(
            "20 instances: worst oracle residual gap {worst_gap:.2e} (bound 1e-8); \
             {improvements}/{perturbations} perturbations beat the trained readout"
        ),
    );
}

#[test]
fn criterion_4_sine_square_at_optimal_bias() {
    let d = defaults();
    let ss = &d.task.sinesquare;
    let opts = SineSquareOptions {
        n_waveforms: ss.n_waveforms,
        points_per_period: ss.points_per_period,
        ridge: ss.ridge,
        target_shifts: ss.target_shifts.clone(),
    };
    let bias = BiasPoint::new(ss.i_dc, ss.field);

    let noise_seeds = [ss.noise_seed, 23, 37, 59, 71];
    let mut errors = 0;
    let mut waveforms = 0;
    let mut rms = Vec::new();
    for &noise_seed in &noise_seeds {
        let seeds = SineSquareSeeds {
            mask_seed: ss.mask_seed,
            label_seed: ss.label_seed,
            noise_seed,
        };
        let run =
            run_sine_square(&opts, &d.encoding.sinesquare, &d.oscillator, bias, seeds).unwrap();
        errors += run.report.misclassified;
        waveforms += run.report.n_test_waveforms;
        rms.push(run.report.rms_test);
    }
    let rms_lo = rms.iter().cloned().fold(f64::INFINITY, f64::min);
    let rms_hi = rms.iter().cloned().fold(0.0f64, f64::max);

    // Expected red: the error clause holds, the pointwise RMS clause cannot.
    // The envelope state is two slow scalars (amplitude plus filtered noise),
    // so input points that share a value and a recent history collapse onto
    // the same reservoir state, and the regression has a floor near 0.35
    // regardless of bias, mask, node count, or ridge. Waveform-level votes
    // average that pointwise spread away, which is why classification stays
    // perfect while the RMS bound stays out of reach.
    let passed = errors == 0 && rms_hi < 0.15;
    verdict(
        "4 sine/square at optimal bias",
        passed,
        &format!(
            "{errors}/{waveforms} waveforms misclassified over {} noise seeds; \
             rms_test spans {rms_lo:.4}..{rms_hi:.4} against the 0.15 bound, \
             a floor set by the model's single effective memory dimension",
            noise_seeds.len()
        ),
    );
}

#[test]
fn criterion_5_sweep_structure() {
    let d = defaults();
    let ss = &d.task.sinesquare;
    let sw = &d.sweep;
    let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    };
    let grid = BiasGrid::new(
        lin(sw.current_min, sw.current_max, sw.n_currents),
        lin(sw.field_min, sw.field_max, sw.n_fields),
    )
    .unwrap();
    let opts = SweepOptions {
        task: SineSquareOptions {
            n_waveforms: ss.n_waveforms,
            points_per_period: ss.points_per_period,
            ridge: ss.ridge,
            target_shifts: ss.target_shifts.clone(),
        },
        noise_duration: sw.noise_duration,
    };
    let seeds = SineSquareSeeds {
        mask_seed: ss.mask_seed,
        label_seed: ss.label_seed,
        noise_seed: ss.noise_seed,
    };
    let cells = run_sweep(&grid, &d.oscillator, &d.encoding.sinesquare, &opts, seeds).unwrap();
    assert_eq!(cells.len(), 169);

    let fom: Vec<f64> = cells.iter().map(|c| c.fom_total).collect();
    let quality: Vec<f64> = cells.iter().map(|c| 1.0 - c.rms).collect();
    let rho = spearman(&fom, &quality).unwrap();

    let low_rms = cells.iter().filter(|c| c.rms < 0.15).count();
    let low_rms_with_errors =
        cells.iter().filter(|c| c.rms < 0.15 && c.errors > 0).count();
    let sub_threshold_v_up = cells
        .iter()
        .filter(|c| c.bias.i_dc < threshold_current(&d.oscillator, c.bias.field))
        .map(|c| c.v_up)
        .fold(0.0f64, f64::max);

    let passed = rho > 0.6 && low_rms_with_errors == 0 && sub_threshold_v_up < 0.5;
    verdict(
        "5 sweep structure",
        passed,
        &format!(
            "spearman(fom, 1-rms) = {rho:.4} over 169 cells (bound 0.6); \
             {low_rms_with_errors}/{low_rms} cells under rms 0.15 misclassify; \
             below-threshold v_up peaks at {sub_threshold_v_up:.3} mV (bound 0.5)"
        ),
    );
}

#[test]
fn criterion_6_oscillator_benefit_on_digits() {
    let d = defaults();
    let corpus = synth_corpus(
        &SynthCorpusOptions {
            n_speakers: d.corpus.n_speakers,
            n_utterances: d.corpus.n_utterances,
            sample_rate: d.corpus.sample_rate,
        },
        d.corpus.seed,
    )
    .unwrap();
    assert_eq!(corpus.len(), 500);

    let bias = BiasPoint::new(d.task.digits.i_dc, d.task.digits.field);
    let wsr_at_9 = |enc: &EncodingConfig, frontend: FrontendKind, mode: Mode| -> f64 {
        let mask =
            make_mask(frontend.n_channels(), enc.n_theta, enc.alphabet, d.task.digits.mask_seed)
                .unwrap();
        let setup = DigitTaskSetup {
            frontend,
            mode,
            mask: &mask,
            encoding: enc,
            params: &d.oscillator,
            bias,
            noise_seed: d.task.digits.noise_seed,
        };
        let prepared = prepare_digit_states(&corpus, &setup).unwrap();
        run_spoken_digits(&prepared, 9, d.task.digits.ridge).unwrap().word_success_rate
    };

    let full = &d.encoding.digits;
    let spect_osc = wsr_at_9(full, FrontendKind::Spectrogram, Mode::Oscillator);
    let spect_ctrl = wsr_at_9(full, FrontendKind::Spectrogram, Mode::Control);
    let coch_osc = wsr_at_9(full, FrontendKind::Cochlear, Mode::Oscillator);
    let gap = spect_osc - spect_ctrl;

    let ci = EncodingConfig { n_theta: 100, ..full.clone() };
    let ci_osc = wsr_at_9(&ci, FrontendKind::Spectrogram, Mode::Oscillator);
    let ci_ctrl = wsr_at_9(&ci, FrontendKind::Spectrogram, Mode::Control);

    let passed = gap >= 0.20 && coch_osc >= 0.90 && ci_osc - ci_ctrl >= 0.20;
    verdict(
        "6 oscillator benefit on digits",
        passed,
        &format!(
            "spectrogram at n_train 9: oscillator {spect_osc:.3} vs control {spect_ctrl:.3} \
             (+{:.1} pp, bound 20); cochlear oscillator {coch_osc:.3} (bound 0.90); \
             CI profile at n_theta 100: {ci_osc:.3} vs {ci_ctrl:.3}",
            100.0 * gap
        ),
    );
}

#[test]
fn criterion_7_split_combinatorics() {
    let expected = [10usize, 45, 120, 210, 252, 210, 120, 45, 10];
    let mut counts = Vec::new();
    for (n_train, &want) in (1..=9).zip(&expected) {
        let splits = enumerate_splits(10, n_train).unwrap();
        counts.push(splits.len());

        let got: BTreeSet<Vec<u8>> = splits
            .iter()
            .map(|s| {
                let mut train = s.train.clone();
                train.sort_unstable();
                let mut both = s.train.clone();
                both.extend_from_slice(&s.test);
                both.sort_unstable();
                assert_eq!(both, (1..=10).collect::<Vec<u8>>(), "split must partition 1..=10");
                train
            })
            .collect();
        let brute: BTreeSet<Vec<u8>> = (0u32..1 << 10)
            .filter(|m| m.count_ones() as usize == n_train)
            .map(|m| (0..10).filter(|b| m >> b & 1 == 1).map(|b| b + 1).collect())
            .collect();
        assert_eq!(got, brute, "n_train = {n_train} differs from brute-force enumeration");
        assert_eq!(splits.len(), want);
    }
    verdict(
        "7 split combinatorics",
        counts == expected,
        &format!("split counts for n_train 1..=9: {counts:?}"),
    );
}

#[test]
fn criterion_8_determinism_across_jobs() {
    let base = tempfile::TempDir::new().unwrap();
    let default_cfg = config_dir().join("default.toml");
    let ci_cfg = config_dir().join("ci.toml");

    // digits runs on the CI profile; everything else on the default config.
    let runs: [(&str, &Path, &[&str]); 5] = [
        ("simulate", &default_cfg, &["simulate", "--probe", "step"]),
        ("sinesquare", &default_cfg, &["sinesquare"]),
        ("sweep", &default_cfg, &["sweep"]),
        ("validate", &default_cfg, &["validate"]),
        ("digits", &ci_cfg, &["digits"]),
    ];

    let mut compared = 0usize;
    for (name, cfg, args) in runs {
        let mut outputs: Vec<BTreeMap<String, Vec<u8>>> = Vec::new();
        for (tag, jobs) in [("first", "1"), ("again", "1"), ("parallel", "4")] {
            let dir = base.path().join(format!("{name}_{tag}"));
            let out = Command::new(env!("CARGO_BIN_EXE_stno"))
                .env_remove("STNO_CONFIG")
                .args(args)
                .arg("--config")
                .arg(cfg)
                .arg("--jobs")
                .arg(jobs)
                .arg("--out")
                .arg(&dir)
                .output()
                .unwrap();
            assert!(
                out.status.success(),
                "{name} run failed: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            let mut files = BTreeMap::new();
            for entry in std::fs::read_dir(&dir).unwrap() {
                let entry = entry.unwrap();
                files.insert(
                    entry.file_name().to_string_lossy().into_owned(),
                    std::fs::read(entry.path()).unwrap(),
                );
            }
            assert!(!files.is_empty(), "{name} produced no files");
            outputs.push(files);
        }
        for other in &outputs[1..] {
            assert_eq!(
                outputs[0].keys().collect::<Vec<_>>(),
                other.keys().collect::<Vec<_>>(),
                "{name}: artifact sets differ"
            );
            for (file, bytes) in &outputs[0] {
                assert_eq!(bytes, &other[file], "{name}: {file} differs between runs");
                compared += 1;
            }
        }
    }
    verdict(
        "8 determinism across jobs",
        true,
        &format!(
            "5 commands, 3 runs each (repeat and --jobs 4): {compared} file comparisons, \
             all byte-identical"
        ),
    );
}
