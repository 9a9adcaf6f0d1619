//! Delimited-text report files. Every file starts with a commented header
//! block carrying the artifact version, the config hash and the seed list,
//! followed by plain comma-separated rows. Files are built as strings and
//! written in one call, with LF endings, so identical runs produce identical
//! bytes.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The commented header block shared by every report.
pub fn header(title: &str, config_hash: &str, seeds: &str, meta: &[String]) -> String {
    let mut s = String::new();
    s.push_str(&format!("# stno {title}\n"));
    s.push_str(&format!("# version: {ARTIFACT_VERSION}\n"));
    s.push_str(&format!("# config_hash: {config_hash}\n"));
    s.push_str(&format!("# seeds: {seeds}\n"));
    for line in meta {
        s.push_str(&format!("# {line}\n"));
    }
    s
}

/// Shortest round-trip decimal form; bit-stable across runs.
pub fn fnum(v: f64) -> String {
    format!("{v}")
}

pub fn join_row<I: IntoIterator<Item = String>>(cells: I) -> String {
    let mut row = cells.into_iter().collect::<Vec<_>>().join(",");
    row.push('\n');
    row
}

pub fn write_report(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
