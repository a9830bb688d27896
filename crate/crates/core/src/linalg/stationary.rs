use alloc::vec::Vec;

use super::{check_system, norm2, residual, SolveStats, SparseMatrix};
use crate::{Error, Result};

/// One forward Gauss-Seidel sweep in place. `diag` must hold the nonzero
/// diagonal of `a`.
pub fn gauss_seidel_sweep(a: &SparseMatrix, diag: &[f64], b: &[f64], x: &mut [f64]) {
    for i in 0..a.nrows() {
        let mut s = b[i];
        for (j, v) in a.row(i) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s / diag[i];
    }
}

/// Classical forward Gauss-Seidel, stopping when the relative residual
/// reaches `tol` or after `max_iter` sweeps. A diverging iteration stops as
/// soon as the residual is no longer finite.
pub fn gauss_seidel(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    check_system(a, b, x0, tol)?;
    let diag = a.diagonal();
    if let Some(row) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::SingularDiagonal { row });
    }
    let bnorm = norm2(b);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };

    let mut x = x0.to_vec();
    let mut rel = norm2(&residual(a, b, &x)) / scale;
    let mut history = alloc::vec![rel];
    let mut iterations = 0;
    while rel > tol && iterations < max_iter && rel.is_finite() {
        gauss_seidel_sweep(a, &diag, b, &mut x);
        iterations += 1;
        rel = norm2(&residual(a, b, &x)) / scale;
        history.push(rel);
    }
    Ok((
        x,
        SolveStats {
            iterations,
            final_residual_norm: rel,
            converged: rel <= tol,
            history,
        },
    ))
}
