//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Pivots below this magnitude are treated as singular.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Solves `A x = d` for tridiagonal `A` without pivoting.
///
/// - `lower[i]` couples row `i` to `x[i-1]` (`lower[0]` unused)
/// - `diag[i]` is the main diagonal
/// - `upper[i]` couples row `i` to `x[i+1]` (`upper[n-1]` unused)
///
/// Stable for diagonally dominant M-matrices, which is the only kind the
/// elliptic assembly produces.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    assert!(n > 0, "empty tridiagonal system");
    assert!(lower.len() == n && diag.len() == n && upper.len() == n);

    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];

    let mut pivot = diag[0];
    check_pivot(0, pivot)?;
    c[0] = upper[0] / pivot;
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        check_pivot(i, pivot)?;
        c[i] = upper[i] / pivot;
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

fn check_pivot(row: usize, pivot: f64) -> Result<()> {
    if pivot.abs() < PIVOT_FLOOR || !pivot.is_finite() {
        Err(Error::Singular { row, pivot })
    } else {
        Ok(())
    }
}
