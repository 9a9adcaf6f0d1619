//! `stno`: batch runner for the spintronic reservoir experiments. Every
//! subcommand loads one TOML config, applies flag overrides (flag > file),
//! runs, and writes delimited-text reports whose bytes depend only on the
//! resolved config, never on worker count or wall clock.

mod config;
mod report;
mod validate;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use stno_core::audio::{load_corpus, Corpus, FrontendKind};
use stno_core::encoder::make_mask;
use stno_core::oscillator::{simulate_envelope, threshold_current, BiasPoint, DriveWaveform};
use stno_core::sweep::{run_sweep, SweepCell, SweepOptions};
use stno_core::tasks::{
    prepare_digit_states, run_sine_square, run_spoken_digits, synth_corpus, DigitTaskSetup, Mode,
    TaskReport,
};

use config::{ExperimentConfig, FrontendChoice, ModeChoice, CONFIG_ENV};
use report::{fnum, header, join_row, write_report};

#[derive(Parser)]
#[command(name = "stno", version, about = "Spintronic reservoir computing experiment runner")]
struct Cli {
    /// Experiment config (TOML); falls back to $STNO_CONFIG.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides [paths] out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; rederives every named seed in the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Restrict digit runs to one state mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Restrict digit runs to one audio frontend.
    #[arg(long, global = true, value_enum)]
    frontend: Option<FrontendArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the envelope under a built-in probe or a drive file.
    Simulate {
        /// Built-in probe, used when no drive file is given.
        #[arg(long, value_enum, default_value_t = ProbeArg::Constant)]
        probe: ProbeArg,
        /// Drive file: `t_ns,i_ma` rows on a uniform time grid.
        #[arg(long, value_name = "PATH")]
        drive: Option<PathBuf>,
    },
    /// Spoken-digit learning curves over every train/test split.
    Digits,
    /// Sine/square discrimination at the configured bias.
    Sinesquare,
    /// Bias-plane sweep: task quality and figures of merit per cell.
    Sweep,
    /// Fast invariant suite; exits nonzero if any check fails.
    Validate,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Oscillator,
    Control,
}

impl From<ModeArg> for ModeChoice {
    fn from(arg: ModeArg) -> Self {
        match arg {
            ModeArg::Oscillator => ModeChoice::Oscillator,
            ModeArg::Control => ModeChoice::Control,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FrontendArg {
    Spectrogram,
    Cochlear,
}

impl From<FrontendArg> for FrontendChoice {
    fn from(arg: FrontendArg) -> Self {
        match arg {
            FrontendArg::Spectrogram => FrontendChoice::Spectrogram,
            FrontendArg::Cochlear => FrontendChoice::Cochlear,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProbeArg {
    /// Hold the bare DC bias.
    Constant,
    /// Jump by `simulate.step` mA halfway through.
    Step,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("initializing the worker pool")?;
    }
    let config_path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
        .ok_or_else(|| anyhow!("no config given: pass --config PATH or set {CONFIG_ENV}"))?;
    let mut cfg = ExperimentConfig::load(&config_path)?;
    if let Some(master) = cli.seed {
        cfg.override_seeds(master);
    }
    if let Some(out) = &cli.out {
        cfg.paths.out_dir = out.clone();
    }
    if let Some(mode) = cli.mode {
        cfg.task.digits.mode = mode.into();
    }
    if let Some(frontend) = cli.frontend {
        cfg.task.digits.frontend = frontend.into();
    }

    match cli.command {
        Command::Simulate { probe, drive } => cmd_simulate(&cfg, probe, drive.as_deref()),
        Command::Digits => cmd_digits(&cfg),
        Command::Sinesquare => cmd_sinesquare(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Validate => cmd_validate(&cfg),
    }
}

fn sinesquare_seed_line(cfg: &ExperimentConfig) -> String {
    let ss = &cfg.task.sinesquare;
    format!("mask={} label={} noise={}", ss.mask_seed, ss.label_seed, ss.noise_seed)
}

fn cmd_simulate(cfg: &ExperimentConfig, probe: ProbeArg, drive_path: Option<&Path>) -> Result<()> {
    let sim = &cfg.simulate;
    let bias = BiasPoint::new(sim.i_dc, sim.field);
    let (drive, source) = match drive_path {
        Some(path) => (read_drive(path)?, format!("drive file {}", path.display())),
        None => {
            let n = (sim.duration / sim.dt).round().max(1.0) as usize;
            match probe {
                ProbeArg::Constant => {
                    (DriveWaveform::constant(0.0, n, sim.dt)?, "constant probe".to_string())
                }
                ProbeArg::Step => {
                    let mut samples = vec![0.0; n];
                    for s in &mut samples[n / 2..] {
                        *s = sim.step;
                    }
                    let at = (n / 2 + 1) as f64 * sim.dt;
                    (
                        DriveWaveform::new(samples, sim.dt)?,
                        format!("step probe (+{} mA from t = {} ns)", fnum(sim.step), fnum(at)),
                    )
                }
            }
        }
    };
    let trace = simulate_envelope(&cfg.oscillator, bias, &drive, sim.noise_seed)?;

    let mut text = header(
        "simulate",
        &cfg.hash(),
        &format!("noise={}", sim.noise_seed),
        &[
            format!("bias: i_dc {} mA, field {} mT", fnum(bias.i_dc), fnum(bias.field)),
            format!("input: {source}"),
            "columns: t_ns,v_mV".into(),
        ],
    );
    for (k, &v) in trace.samples().iter().enumerate() {
        text.push_str(&join_row([fnum((k + 1) as f64 * trace.dt()), fnum(v)]));
    }
    let path = write_report(&cfg.paths.out_dir, "envelope.csv", &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_drive(path: &Path) -> Result<DriveWaveform> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading drive file {}", path.display()))?;
    let mut times = Vec::new();
    let mut offsets = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (t, i) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("{}:{}: expected `t_ns,i_ma`", path.display(), idx + 1))?;
        let parse = |s: &str, what| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("{}:{}: bad {what}", path.display(), idx + 1))
        };
        times.push(parse(t, "time")?);
        offsets.push(parse(i, "current")?);
    }
    if times.len() < 2 {
        bail!("{}: need at least two samples to set the time step", path.display());
    }
    let dt = times[1] - times[0];
    if !(dt.is_finite() && dt > 0.0) {
        bail!("{}: time column must increase", path.display());
    }
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            bail!("{}: non-uniform time step between rows {} and {}", path.display(), k + 1, k + 2);
        }
    }
    Ok(DriveWaveform::new(offsets, dt)?)
}

fn cmd_sinesquare(cfg: &ExperimentConfig) -> Result<()> {
    let run = run_sine_square(
        &cfg.sinesquare_options(),
        &cfg.encoding.sinesquare,
        &cfg.oscillator,
        cfg.sinesquare_bias(),
        cfg.sinesquare_seeds(),
    )?;
    let r = &run.report;
    let bias = cfg.sinesquare_bias();
    let mut text = header(
        "sinesquare",
        &cfg.hash(),
        &sinesquare_seed_line(cfg),
        &[
            format!("bias: i_dc {} mA, field {} mT", fnum(bias.i_dc), fnum(bias.field)),
            "columns: rms_train,rms_test,misclassified,n_test_waveforms,target_shift".into(),
        ],
    );
    text.push_str(&join_row([
        fnum(r.rms_train),
        fnum(r.rms_test),
        r.misclassified.to_string(),
        r.n_test_waveforms.to_string(),
        r.target_shift.to_string(),
    ]));
    let path = write_report(&cfg.paths.out_dir, "sinesquare.csv", &text)?;
    println!("wrote {}", path.display());
    println!(
        "rms_test {} with {}/{} waveforms misclassified",
        fnum(r.rms_test),
        r.misclassified,
        r.n_test_waveforms
    );
    Ok(())
}

fn load_task_corpus(cfg: &ExperimentConfig) -> Result<Corpus> {
    match &cfg.paths.corpus_dir {
        Some(dir) => Ok(load_corpus(dir)?),
        None => Ok(synth_corpus(&cfg.synth_options(), cfg.corpus.seed)?),
    }
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn cmd_digits(cfg: &ExperimentConfig) -> Result<()> {
    let corpus = load_task_corpus(cfg)?;
    let d = &cfg.task.digits;
    let enc = &cfg.encoding.digits;
    let hash = cfg.hash();
    let seeds = format!("corpus={} mask={} noise={}", cfg.corpus.seed, d.mask_seed, d.noise_seed);
    let bias = cfg.digits_bias();
    let out = &cfg.paths.out_dir;

    let mut curve_rows = Vec::new();
    for frontend in d.frontend.kinds() {
        let mask = make_mask(frontend.n_channels(), enc.n_theta, enc.alphabet, d.mask_seed)?;
        for mode in d.mode.modes() {
            let started = Instant::now();
            let setup = DigitTaskSetup {
                frontend,
                mode,
                mask: &mask,
                encoding: enc,
                params: &cfg.oscillator,
                bias,
                noise_seed: d.noise_seed,
            };
            let prepared = prepare_digit_states(&corpus, &setup)?;
            let reports = (d.n_train_min..=d.n_train_max)
                .map(|n| run_spoken_digits(&prepared, n, d.ridge))
                .collect::<stno_core::Result<Vec<TaskReport>>>()?;
            eprintln!(
                "digits {} {}: {:.1} s",
                frontend.name(),
                mode.name(),
                started.elapsed().as_secs_f64()
            );

            for rep in &reports {
                curve_rows.push(join_row([
                    frontend.name().to_string(),
                    mode.name().to_string(),
                    rep.n_train.to_string(),
                    fnum(rep.word_success_rate),
                    fnum(rep.wsr_std),
                    fnum(rep.rms_deviation),
                ]));
            }
            write_splits_report(out, &hash, &seeds, frontend, mode, &reports)?;
            write_confusion_report(out, &hash, &seeds, frontend, mode, &reports)?;
        }
    }

    let mut text = header(
        "digits curves",
        &hash,
        &seeds,
        &[
            format!("bias: i_dc {} mA, field {} mT", fnum(bias.i_dc), fnum(bias.field)),
            format!("n_theta: {}", enc.n_theta),
            "wsr_std: sample standard deviation over the train/test splits".into(),
            "columns: frontend,mode,n_train,wsr_mean,wsr_std,rms_mean".into(),
        ],
    );
    for row in curve_rows {
        text.push_str(&row);
    }
    let path = write_report(out, "digits_curves.csv", &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_splits_report(
    out: &Path,
    hash: &str,
    seeds: &str,
    frontend: FrontendKind,
    mode: Mode,
    reports: &[TaskReport],
) -> Result<()> {
    let mut text = header(
        "digits splits",
        hash,
        seeds,
        &[
            format!("frontend: {}", frontend.name()),
            format!("mode: {}", mode.name()),
            "summary rows carry split=mean and split=std".into(),
            "columns: n_train,split,train_utterances,wsr,rms".into(),
        ],
    );
    for rep in reports {
        for (k, s) in rep.splits.iter().enumerate() {
            let train =
                s.train_utterances.iter().map(|u| u.to_string()).collect::<Vec<_>>().join("+");
            text.push_str(&join_row([
                rep.n_train.to_string(),
                (k + 1).to_string(),
                train,
                fnum(s.word_success_rate),
                fnum(s.rms_deviation),
            ]));
        }
        let rms: Vec<f64> = rep.splits.iter().map(|s| s.rms_deviation).collect();
        let (_, rms_std) = mean_and_std(&rms);
        text.push_str(&join_row([
            rep.n_train.to_string(),
            "mean".into(),
            String::new(),
            fnum(rep.word_success_rate),
            fnum(rep.rms_deviation),
        ]));
        text.push_str(&join_row([
            rep.n_train.to_string(),
            "std".into(),
            String::new(),
            fnum(rep.wsr_std),
            fnum(rms_std),
        ]));
    }
    let name = format!("digits_splits_{}_{}.csv", frontend.name(), mode.name());
    let path = write_report(out, &name, &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_confusion_report(
    out: &Path,
    hash: &str,
    seeds: &str,
    frontend: FrontendKind,
    mode: Mode,
    reports: &[TaskReport],
) -> Result<()> {
    let mut text = header(
        "digits confusion",
        hash,
        seeds,
        &[
            format!("frontend: {}", frontend.name()),
            format!("mode: {}", mode.name()),
            "counts summed over splits; one 10x10 block per n_train".into(),
            "columns: n_train,truth,p0,p1,p2,p3,p4,p5,p6,p7,p8,p9".into(),
        ],
    );
    for rep in reports {
        for (truth, row) in rep.confusion.iter().enumerate() {
            let cells = [rep.n_train.to_string(), truth.to_string()]
                .into_iter()
                .chain(row.iter().map(|c| c.to_string()));
            text.push_str(&join_row(cells));
        }
    }
    let name = format!("digits_confusion_{}_{}.csv", frontend.name(), mode.name());
    let path = write_report(out, &name, &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<()> {
    let grid = cfg.sweep.grid()?;
    let opts = SweepOptions {
        task: cfg.sinesquare_options(),
        noise_duration: cfg.sweep.noise_duration,
    };
    let started = Instant::now();
    let cells = run_sweep(
        &grid,
        &cfg.oscillator,
        &cfg.encoding.sinesquare,
        &opts,
        cfg.sinesquare_seeds(),
    )?;
    eprintln!("sweep {} cells: {:.1} s", cells.len(), started.elapsed().as_secs_f64());

    let hash = cfg.hash();
    let seeds = sinesquare_seed_line(cfg);
    let out = &cfg.paths.out_dir;
    let axis = |vals: &[f64]| vals.iter().map(|v| fnum(*v)).collect::<Vec<_>>().join(",");
    let contour = grid
        .fields
        .iter()
        .map(|&h| fnum(threshold_current(&cfg.oscillator, h)))
        .collect::<Vec<_>>()
        .join(",");

    let maps: [(&str, fn(&SweepCell) -> f64); 4] = [
        ("rms", |c| c.rms),
        ("v_up_x_v_dw", |c| c.fom_amp),
        ("inv_delta_v", |c| c.fom_noise),
        ("fom_total", |c| c.fom_total),
    ];
    for (name, value) in maps {
        let mut text = header(
            &format!("sweep map {name}"),
            &hash,
            &seeds,
            &[
                format!("currents_ma: {}", axis(&grid.currents)),
                format!("fields_mt: {}", axis(&grid.fields)),
                format!("i_th_ma: {contour} (analytic threshold at each field)"),
                "matrix: leading column i_dc (mA); remaining columns follow fields_mt".into(),
            ],
        );
        let head = std::iter::once("i_dc\\field".to_string())
            .chain(grid.fields.iter().map(|v| fnum(*v)));
        text.push_str(&join_row(head));
        for (ci, &i_dc) in grid.currents.iter().enumerate() {
            let row = std::iter::once(fnum(i_dc)).chain(
                (0..grid.fields.len()).map(|fi| fnum(value(&cells[ci * grid.fields.len() + fi]))),
            );
            text.push_str(&join_row(row));
        }
        let path = write_report(out, &format!("sweep_{name}.csv"), &text)?;
        println!("wrote {}", path.display());
    }

    let mut text = header(
        "sweep cells",
        &hash,
        &seeds,
        &["columns: i_dc,field,v_up,v_dw,delta_v,rms,errors,fom_amp,fom_noise,fom_total".into()],
    );
    for c in &cells {
        text.push_str(&join_row([
            fnum(c.bias.i_dc),
            fnum(c.bias.field),
            fnum(c.v_up),
            fnum(c.v_dw),
            fnum(c.delta_v),
            fnum(c.rms),
            c.errors.to_string(),
            fnum(c.fom_amp),
            fnum(c.fom_noise),
            fnum(c.fom_total),
        ]));
    }
    let path = write_report(out, "sweep_cells.csv", &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_validate(cfg: &ExperimentConfig) -> Result<()> {
    let checks = validate::run_all(cfg);
    let mut text = header(
        "validate",
        &cfg.hash(),
        "internal=314159 (pseudoinverse probe)",
        &["columns: check,status,detail".into()],
    );
    let mut failures = 0;
    for c in &checks {
        let status = if c.passed { "pass" } else { "fail" };
        println!("check {}: {} ({})", c.name, status, c.detail);
        text.push_str(&join_row([
            c.name.to_string(),
            status.to_string(),
            c.detail.replace(',', ";"),
        ]));
        if !c.passed {
            failures += 1;
        }
    }
    let path = write_report(&cfg.paths.out_dir, "validate.csv", &text)?;
    println!("wrote {}", path.display());
    if failures > 0 {
        bail!("{failures} validation check(s) failed");
    }
    Ok(())
}
