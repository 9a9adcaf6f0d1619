//! Linear readout: training, reconstruction, classification.
//!
//! Training solves `min_W ||W S - Y||_F`. With no ridge the minimum-norm
//! solution `W = Y S^+` is taken through a rank-revealing SVD of the state
//! matrix; with a ridge the normal equations `W = Y S^T (S S^T + l I)^-1`
//! are solved by Cholesky. A second entry point accepts the precomputed
//! Gram and cross matrices so that very wide state matrices (many more
//! columns than rows) can be trained without materializing them twice.

use std::io::{self, BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Trained readout matrix (`n_classes x n_features`).
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutWeights {
    pub matrix: DMatrix<f64>,
    pub ridge: f64,
}

/// Header carried by exported weight files so a run can be reproduced.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightsMeta {
    pub n_classes: usize,
    pub n_features: usize,
    pub ridge: f64,
    pub mask_seed: u64,
    pub config_hash: String,
}

fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

fn check_training_inputs(states: &DMatrix<f64>, targets: &DMatrix<f64>, ridge: f64) -> Result<()> {
    if states.nrows() == 0 || states.ncols() == 0 {
        return Err(Error::ShapeMismatch("empty state matrix".into()));
    }
    if targets.ncols() != states.ncols() || targets.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "targets are {}x{} but states have {} columns",
            targets.nrows(),
            targets.ncols(),
            states.ncols()
        )));
    }
    ensure_finite(states, "states")?;
    ensure_finite(targets, "targets")?;
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {ridge}")));
    }
    Ok(())
}

/// Trains the readout on explicit state and target matrices (one column per
/// interval). `ridge = 0` gives the minimum-norm least-squares solution with
/// singular values at or below `eps * max_dim * s_max` treated as zero.
pub fn train_weights(
    states: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    ridge: f64,
) -> Result<ReadoutWeights> {
    check_training_inputs(states, targets, ridge)?;
    if ridge > 0.0 {
        let mut gram = states * states.transpose();
        for i in 0..gram.nrows() {
            gram[(i, i)] += ridge;
        }
        let cross = targets * states.transpose();
        return solve_gram(gram, &cross, ridge);
    }

    let svd = states.clone().svd(true, true);
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");
    let s_max = svd.singular_values.max();
    let tol = f64::EPSILON * states.nrows().max(states.ncols()) as f64 * s_max;

    // W = (Y V) S^+ U^T, dropping directions with vanishing singular values.
    let mut yv = targets * v_t.transpose();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let scale = if s > tol { 1.0 / s } else { 0.0 };
        yv.column_mut(j).scale_mut(scale);
    }
    Ok(ReadoutWeights { matrix: yv * u.transpose(), ridge: 0.0 })
}

/// Trains the readout from sufficient statistics: `gram = S S^T` and
/// `cross = Y S^T`, with `n_cols` the number of state columns behind them.
///
/// Computes the same minimizer as [`train_weights`]; with `ridge = 0` the
/// rank cut happens on the eigenvalue scale of the Gram matrix (eigenvalues
/// at or below `eps * max_dim * lambda_max` dropped), a slightly coarser but
/// better-conditioned cutoff appropriate for state matrices with far more
/// columns than rows.
pub fn train_weights_gram(
    gram: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    n_cols: usize,
    ridge: f64,
) -> Result<ReadoutWeights> {
    if gram.nrows() != gram.ncols() || gram.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "gram matrix must be square, got {}x{}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    if cross.ncols() != gram.ncols() || cross.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "cross matrix is {}x{} but gram has {} columns",
            cross.nrows(),
            cross.ncols(),
            gram.ncols()
        )));
    }
    ensure_finite(gram, "gram")?;
    ensure_finite(cross, "cross")?;
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {ridge}")));
    }

    if ridge > 0.0 {
        let mut g = gram.clone();
        for i in 0..g.nrows() {
            g[(i, i)] += ridge;
        }
        return solve_gram(g, cross, ridge);
    }

    let eig = gram.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.max().max(0.0);
    let tol = f64::EPSILON * gram.nrows().max(n_cols) as f64 * lambda_max;
    // W = T U diag(1/lambda) U^T over retained eigenvalues.
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let scale = if lambda > tol { 1.0 / lambda } else { 0.0 };
        scaled.column_mut(j).scale_mut(scale);
    }
    Ok(ReadoutWeights { matrix: cross * scaled * eig.eigenvectors.transpose(), ridge: 0.0 })
}

fn solve_gram(gram: DMatrix<f64>, cross: &DMatrix<f64>, ridge: f64) -> Result<ReadoutWeights> {
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge-regularized gram matrix not positive definite".into()))?;
    let w_t = chol.solve(&cross.transpose());
    Ok(ReadoutWeights { matrix: w_t.transpose(), ridge })
}

/// Applies the readout to a state matrix.
pub fn reconstruct_outputs(weights: &ReadoutWeights, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if weights.matrix.ncols() != states.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "weights expect {} features, states have {} rows",
            weights.matrix.ncols(),
            states.nrows()
        )));
    }
    Ok(&weights.matrix * states)
}

/// Collapses per-interval outputs of one utterance to a label: the class
/// whose mean output over the columns is largest. Ties resolve to the lowest
/// class index.
pub fn classify_word(outputs: &DMatrix<f64>, n_classes: usize) -> Result<usize> {
    if outputs.nrows() != n_classes || n_classes == 0 {
        return Err(Error::ShapeMismatch(format!(
            "outputs have {} rows, expected {n_classes}",
            outputs.nrows()
        )));
    }
    if outputs.ncols() == 0 {
        return Err(Error::ShapeMismatch("no output columns to classify".into()));
    }
    let means = outputs.column_mean();
    Ok(argmax(&means))
}

pub(crate) fn argmax(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Root-mean-square deviation between reconstructed outputs and targets,
/// taken over every entry. For 0/1 targets this is already a fraction of the
/// target span.
pub fn rms_deviation(outputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<f64> {
    if outputs.shape() != targets.shape() {
        return Err(Error::ShapeMismatch(format!(
            "outputs {:?} vs targets {:?}",
            outputs.shape(),
            targets.shape()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::ShapeMismatch("empty output matrix".into()));
    }
    let n = (outputs.nrows() * outputs.ncols()) as f64;
    let ss: f64 = outputs.iter().zip(targets.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / n).sqrt())
}

/// Writes weights as delimited text: a commented header with the metadata
/// needed to reproduce the run, then one comma-separated row per class.
/// Floats use the shortest round-trip representation, so a read-back is
/// bit-exact.
pub fn write_weights<W: Write>(
    mut out: W,
    weights: &ReadoutWeights,
    meta: &WeightsMeta,
) -> io::Result<()> {
    writeln!(out, "# stno readout weights v1")?;
    writeln!(out, "# n_classes: {}", meta.n_classes)?;
    writeln!(out, "# n_features: {}", meta.n_features)?;
    writeln!(out, "# ridge: {}", meta.ridge)?;
    writeln!(out, "# mask_seed: {}", meta.mask_seed)?;
    writeln!(out, "# config_hash: {}", meta.config_hash)?;
    for i in 0..weights.matrix.nrows() {
        let row: Vec<String> =
            weights.matrix.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads weights written by [`write_weights`].
pub fn read_weights<R: BufRead>(reader: R) -> Result<(ReadoutWeights, WeightsMeta)> {
    let label = "weights";
    let mut n_classes = None;
    let mut n_features = None;
    let mut ridge = None;
    let mut mask_seed = None;
    let mut config_hash = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(label, e))?;
        let lineno = idx + 1;
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((key, value)) = rest.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "n_classes" => n_classes = value.parse().ok(),
                    "n_features" => n_features = value.parse().ok(),
                    "ridge" => ridge = value.parse().ok(),
                    "mask_seed" => mask_seed = value.parse().ok(),
                    "config_hash" => config_hash = Some(value.to_string()),
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::parse(label, lineno, e.to_string()))?);
    }

    let meta = WeightsMeta {
        n_classes: n_classes.ok_or_else(|| Error::parse(label, 0, "missing n_classes"))?,
        n_features: n_features.ok_or_else(|| Error::parse(label, 0, "missing n_features"))?,
        ridge: ridge.ok_or_else(|| Error::parse(label, 0, "missing ridge"))?,
        mask_seed: mask_seed.ok_or_else(|| Error::parse(label, 0, "missing mask_seed"))?,
        config_hash: config_hash.ok_or_else(|| Error::parse(label, 0, "missing config_hash"))?,
    };
    if rows.len() != meta.n_classes || rows.iter().any(|r| r.len() != meta.n_features) {
        return Err(Error::ShapeMismatch(format!(
            "weights body does not match header {}x{}",
            meta.n_classes, meta.n_features
        )));
    }
    let matrix = DMatrix::from_fn(meta.n_classes, meta.n_features, |i, j| rows[i][j]);
    Ok((ReadoutWeights { matrix, ridge: meta.ridge }, meta))
}
