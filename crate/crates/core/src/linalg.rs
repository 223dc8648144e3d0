//! Dense symmetric positive definite solves via Cholesky factorization.
//! Systems here are small (factor count or feature count on a side), so a
//! straightforward row-major implementation beats pulling in a BLAS.

use crate::{Error, Result};

/// Solve `a x = b` where `a` is symmetric positive definite, row-major
/// `n x n` with `n == b.len()`. `a` must be exactly symmetric; only the
/// lower triangle is read.
pub fn solve_spd(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::numeric(format!(
            "solve_spd: matrix has {} entries, expected {}",
            a.len(),
            n * n
        )));
    }
    let mut l = a.to_vec();
    cholesky_in_place(&mut l, n)?;

    // Forward substitution L y = b, then back substitution L^T x = y.
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

/// Lower Cholesky factor in place. Fails on non-positive pivots, which
/// signals a matrix that is not positive definite (or has gone non-finite).
fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::numeric(format!(
                "cholesky: non-positive pivot {d:e} at column {j}"
            )));
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    Ok(())
}

/// Relative residual `||a x - b|| / ||b||` (absolute norm when `b` is 0).
pub fn relative_residual(a: &[f64], x: &[f64], b: &[f64]) -> f64 {
    let n = b.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let mut s = -b[i];
        for k in 0..n {
            s += a[i * n + k] * x[k];
        }
        num += s * s;
        den += b[i] * b[i];
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}
