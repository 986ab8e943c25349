//! Small dense linear-algebra helpers shared by the kernel, design and GP code.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Cholesky factorization that retries with diagonal jitter 1e-10, 1e-9, ..., 1e-6.
pub(crate) fn cholesky_with_jitter(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-12) {
        let mut shifted = m.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical {
        what: format!("{what}: Cholesky failed after jitter escalation to {JITTER_MAX:e}"),
        condition: condition_estimate(m),
    })
}

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix.
pub(crate) fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix plus an orthonormal basis of its
/// null space (as columns). Eigenvalues below `rel_tol * max_eig` count as zero.
pub(crate) fn psd_pseudo_inverse(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = rel_tol * max.max(f64::MIN_POSITIVE);
    let mut pinv = DMatrix::zeros(n, n);
    let mut null_cols = Vec::new();
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        if ev > cutoff {
            pinv += (col * col.transpose()) / ev;
        } else {
            null_cols.push(col.clone_owned());
        }
    }
    let null = if null_cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    (pinv, null)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
