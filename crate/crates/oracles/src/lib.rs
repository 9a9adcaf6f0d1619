//! Dependency-free reference linear algebra used as independent test oracles.
//!
//! Everything here is deliberately written from scratch on `Vec<Vec<f64>>`
//! (row-major) with no external crates, so tests can cross-check the
//! production implementations against a second, unrelated route: Gaussian
//! elimination for the normal equations and a one-sided Jacobi SVD for
//! pseudoinverse / minimum-norm least squares. Clarity over speed; intended
//! for small problem sizes only.

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(rows: usize, cols: usize) -> Mat {
    vec![vec![0.0; cols]; rows]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn transpose(a: &Mat) -> Mat {
    if a.is_empty() {
        return Vec::new();
    }
    let mut t = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            t[j][i] = v;
        }
    }
    t
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (m, k) = (a.len(), a[0].len());
    let n = b[0].len();
    assert_eq!(k, b.len(), "inner dimensions must agree");
    let mut c = zeros(m, n);
    for i in 0..m {
        for l in 0..k {
            let av = a[i][l];
            if av == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += av * b[l][j];
            }
        }
    }
    c
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect()
}

pub fn frobenius_norm(a: &Mat) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves `a x = b` for square `a` by Gaussian elimination with partial
/// pivoting; `b` may have several right-hand-side columns. Returns `None`
/// when a pivot collapses (singular system).
pub fn solve(a: &Mat, b: &Mat) -> Option<Mat> {
    let n = a.len();
    assert!(a.iter().all(|r| r.len() == n));
    assert_eq!(b.len(), n);
    let rhs = b[0].len();
    // Augmented working copy.
    let mut w: Mat = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb.iter()).copied().collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| w[i][col].abs().partial_cmp(&w[j][col].abs()).unwrap())?;
        if w[pivot][col].abs() < 1e-300 {
            return None;
        }
        w.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = w[row][col] / w[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n + rhs {
                let upd = w[col][k] * f;
                w[row][k] -= upd;
            }
        }
    }
    let mut x = zeros(n, rhs);
    for i in 0..n {
        for j in 0..rhs {
            x[i][j] = w[i][n + j] / w[i][i];
        }
    }
    Some(x)
}

/// One-sided Jacobi SVD. Returns `(u, s, v)` with `a = u * diag(s) * v^T`,
/// `s` sorted descending. Columns of `u` for vanishing singular values are
/// zero. Works for any shape (internally transposes wide inputs).
pub fn jacobi_svd(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    let m = a.len();
    let n = a[0].len();
    if m < n {
        let (u, s, v) = jacobi_svd(&transpose(a));
        return (v, s, u);
    }
    let mut b = a.clone();
    let mut v = identity(n);
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for row in &b {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if alpha * beta == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in b.iter_mut() {
                    let (bp, bq) = (row[p], row[q]);
                    row[p] = c * bp - s * bq;
                    row[q] = s * bp + c * bq;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> =
        (0..n).map(|j| b.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u = zeros(m, n);
    let mut v_sorted = zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        if norms[old_j] > 0.0 {
            for i in 0..m {
                u[i][new_j] = b[i][old_j] / norms[old_j];
            }
        }
        for i in 0..n {
            v_sorted[i][new_j] = v[i][old_j];
        }
    }
    (u, s, v_sorted)
}

/// Moore-Penrose pseudoinverse via the Jacobi SVD, dropping singular values
/// at or below `eps * max(m, n) * s_max`.
pub fn pinv(a: &Mat) -> Mat {
    let m = a.len();
    let n = a[0].len();
    let (u, s, v) = jacobi_svd(a);
    let s_max = s.first().copied().unwrap_or(0.0);
    let tol = f64::EPSILON * m.max(n) as f64 * s_max;
    // pinv = V diag(1/s) U^T over retained singular values.
    let r = s.len();
    let mut vs = zeros(n, r);
    for j in 0..r {
        if s[j] > tol {
            for i in 0..n {
                vs[i][j] = v[i][j] / s[j];
            }
        }
    }
    matmul(&vs, &transpose(&u))
}

/// Minimum-norm least-squares readout: `w = y * pinv(s)`.
pub fn lstsq_min_norm(states: &Mat, targets: &Mat) -> Mat {
    matmul(targets, &pinv(states))
}

/// Ridge / normal-equations readout `w = y s^T (s s^T + ridge I)^-1`.
/// `None` when the regularized Gram matrix is singular.
pub fn normal_equations_weights(states: &Mat, targets: &Mat, ridge: f64) -> Option<Mat> {
    let st = transpose(states);
    let mut gram = matmul(states, &st);
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let cross = matmul(targets, &st);
    // Solve gram * w^T = cross^T.
    let wt = solve(&gram, &transpose(&cross))?;
    Some(transpose(&wt))
}

/// `|| w * states - targets ||_F`.
pub fn residual_fro(w: &Mat, states: &Mat, targets: &Mat) -> f64 {
    frobenius_norm(&sub(&matmul(w, states), targets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    /// Small deterministic pseudo-random fill, no external crates.
    fn fill(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        (0..rows).map(|_| (0..cols).map(|_| next()).collect()).collect()
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = vec![vec![1.0], vec![-2.0]];
        let b = matmul(&a, &x);
        let got = solve(&a, &b).unwrap();
        assert!(close(got[0][0], 1.0, 1e-12) && close(got[1][0], -2.0, 1e-12));
    }

    #[test]
    fn solve_detects_singularity() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve(&a, &identity(2)).is_none());
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        for (rows, cols, seed) in [(5, 3, 1), (3, 7, 2), (6, 6, 3)] {
            let a = fill(rows, cols, seed);
            let (u, s, v) = jacobi_svd(&a);
            let mut us = u.clone();
            for row in us.iter_mut() {
                for (j, val) in row.iter_mut().enumerate() {
                    *val *= s[j];
                }
            }
            let rebuilt = matmul(&us, &transpose(&v));
            assert!(frobenius_norm(&sub(&rebuilt, &a)) < 1e-10 * frobenius_norm(&a));
            for w in s.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn svd_flags_rank_deficiency() {
        // Second row is a multiple of the first: rank 1.
        let a = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]];
        let (_, s, _) = jacobi_svd(&a);
        assert!(s[1] < 1e-12 * s[0]);
    }

    #[test]
    fn pinv_satisfies_penrose_identities() {
        let a = fill(4, 6, 9);
        let p = pinv(&a);
        let apa = matmul(&a, &matmul(&p, &a));
        let pap = matmul(&p, &matmul(&a, &p));
        assert!(frobenius_norm(&sub(&apa, &a)) < 1e-10 * frobenius_norm(&a));
        assert!(frobenius_norm(&sub(&pap, &p)) < 1e-10 * frobenius_norm(&p));
    }

    #[test]
    fn min_norm_and_normal_equations_agree_on_full_rank() {
        let s = fill(4, 12, 5);
        let y = fill(2, 12, 6);
        let w_mn = lstsq_min_norm(&s, &y);
        let w_ne = normal_equations_weights(&s, &y, 0.0).unwrap();
        assert!(frobenius_norm(&sub(&w_mn, &w_ne)) < 1e-9 * (1.0 + frobenius_norm(&w_ne)));
    }
}
