//! Behaviour of the `stno` binary itself: config resolution, flag overrides,
//! report headers, and failure modes. Everything runs on the miniature
//! fixture config so each invocation is fast.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG_ENV: &str = "STNO_CONFIG";

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small.toml")
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml")
}

/// Runs the binary with a clean config environment and the given args.
fn stno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stno"))
        .env_remove(CONFIG_ENV)
        .args(args)
        .output()
        .expect("spawning stno")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("reading {name} from {}: {e}", dir.display()))
}

/// Lines outside the commented header block.
fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).collect()
}

#[test]
fn missing_config_is_an_error_naming_both_sources() {
    let out = stno(&["validate"]);
    assert!(!out.status.success());
    let err = stderr_of(&out);
    assert!(err.contains("--config"), "stderr: {err}");
    assert!(err.contains(CONFIG_ENV), "stderr: {err}");
}

#[test]
fn env_var_supplies_the_config_path() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_stno"))
        .env(CONFIG_ENV, fixture())
        .args(["simulate", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_success(&out);
    let text = read(tmp.path(), "envelope.csv");
    assert!(text.starts_with("# stno simulate\n"), "header: {text}");
    // 400 ns at 2 ns per step.
    assert_eq!(data_lines(&text).len(), 200);
}

#[test]
fn flag_config_beats_the_env_var() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_stno"))
        .env(CONFIG_ENV, "/nonexistent/config.toml")
        .args(["simulate", "--config"])
        .arg(fixture())
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_success(&out);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let mut text = std::fs::read_to_string(fixture()).unwrap();
    text.push_str("\ntypo_knob = 1\n");
    let broken = tmp.path().join("broken.toml");
    std::fs::write(&broken, text).unwrap();
    let out = stno(&["validate", "--config", broken.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("unknown field"), "stderr: {}", stderr_of(&out));
}

#[test]
fn every_report_embeds_version_hash_and_seeds() {
    let tmp = TempDir::new().unwrap();
    let out = stno(&[
        "sinesquare",
        "--config",
        fixture().to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_success(&out);
    let text = read(tmp.path(), "sinesquare.csv");
    let version = format!("# version: {}\n", env!("CARGO_PKG_VERSION"));
    assert!(text.contains(&version), "header: {text}");
    assert!(text.contains("# seeds: mask=3 label=4 noise=5\n"), "header: {text}");
    let hash = text
        .lines()
        .find_map(|l| l.strip_prefix("# config_hash: "))
        .expect("config_hash line");
    assert_eq!(hash.len(), 16);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn seed_flag_rederives_every_named_seed() {
    let tmp = TempDir::new().unwrap();
    let run = |seed: &str, sub: &str| {
        let dir = tmp.path().join(format!("{sub}_{seed}"));
        let out = stno(&[
            "simulate",
            "--config",
            fixture().to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_success(&out);
        read(&dir, "envelope.csv")
    };
    let a1 = run("1", "a");
    let a2 = run("1", "b");
    let b = run("2", "a");
    assert_eq!(a1, a2, "same master seed must reproduce the file bytes");
    assert_ne!(data_lines(&a1), data_lines(&b), "different master seed, same noise trace");
}

#[test]
fn out_flag_creates_nested_directories() {
    let tmp = TempDir::new().unwrap();
    let deep = tmp.path().join("a/b/c");
    let out = stno(&[
        "simulate",
        "--config",
        fixture().to_str().unwrap(),
        "--out",
        deep.to_str().unwrap(),
    ]);
    assert_success(&out);
    assert!(deep.join("envelope.csv").is_file());
}

#[test]
fn drive_file_runs_on_a_uniform_grid() {
    let tmp = TempDir::new().unwrap();
    let drive = tmp.path().join("drive.csv");
    std::fs::write(&drive, "# t_ns,i_ma\n\n0,0\n2,0.5\n4,1\n6,1\n8,0.5\n10,0\n").unwrap();
    let out = stno(&[
        "simulate",
        "--config",
        fixture().to_str().unwrap(),
        "--drive",
        drive.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_success(&out);
    let text = read(tmp.path(), "envelope.csv");
    assert!(text.contains("drive file"), "header should name the input: {text}");
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("2,"), "first sample lands at t = dt: {}", rows[0]);
}

#[test]
fn non_uniform_drive_files_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let drive = tmp.path().join("drive.csv");
    std::fs::write(&drive, "0,0\n2,1\n5,0\n").unwrap();
    let out = stno(&[
        "simulate",
        "--config",
        fixture().to_str().unwrap(),
        "--drive",
        drive.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("non-uniform"), "stderr: {}", stderr_of(&out));
}

#[test]
fn mode_and_frontend_flags_restrict_digit_runs() {
    let tmp = TempDir::new().unwrap();
    let out = stno(&[
        "digits",
        "--config",
        fixture().to_str().unwrap(),
        "--mode",
        "control",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_success(&out);
    let curves = read(tmp.path(), "digits_curves.csv");
    for row in data_lines(&curves) {
        assert!(row.starts_with("spectrogram,control,"), "unexpected row: {row}");
    }
    assert!(tmp.path().join("digits_splits_spectrogram_control.csv").is_file());
    assert!(!tmp.path().join("digits_splits_spectrogram_oscillator.csv").exists());
}

#[test]
fn sweep_bytes_are_independent_of_jobs() {
    let tmp = TempDir::new().unwrap();
    let run = |jobs: &str| {
        let dir = tmp.path().join(format!("jobs{jobs}"));
        let out = stno(&[
            "sweep",
            "--config",
            fixture().to_str().unwrap(),
            "--jobs",
            jobs,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_success(&out);
        dir
    };
    let one = run("1");
    let three = run("3");
    for name in
        ["sweep_rms.csv", "sweep_v_up_x_v_dw.csv", "sweep_inv_delta_v.csv", "sweep_fom_total.csv", "sweep_cells.csv"]
    {
        assert_eq!(read(&one, name), read(&three, name), "{name} differs across --jobs");
    }
}

#[test]
fn validate_succeeds_on_the_default_config() {
    let tmp = TempDir::new().unwrap();
    let out = stno(&[
        "validate",
        "--config",
        default_config().to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches(": pass").count(), 4, "stdout: {stdout}");
    assert!(!stdout.contains(": fail"), "stdout: {stdout}");
    assert!(tmp.path().join("validate.csv").is_file());
}
