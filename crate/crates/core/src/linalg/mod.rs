//! Dense and compressed-row matrices, iterative and direct solvers, and the
//! norms used by the convergence tests.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`. Every iterative solver measures
//! convergence with the relative residual `|b - Ax| / |b|`, falling back to
//! the absolute residual when `b = 0`.

mod dense;
mod krylov;
mod norm;
mod sparse;
mod stationary;

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;
use alloc::vec::Vec;

pub use dense::{dense_solve, DenseMatrix, LuFactorization};
pub use krylov::{bicgstab, conjugate_gradient, gmres, DEFAULT_RESTART};
pub use norm::{h1_norm, h1_seminorm, l2_norm, norm, Norm};
pub use sparse::{SparseMatrix, TripletBuilder};
pub use stationary::{gauss_seidel, gauss_seidel_sweep};

/// Anything that can compute `y = A x` for square `A`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative residual of the returned iterate, recomputed from scratch
    /// (absolute when `b = 0`).
    pub final_residual_norm: f64,
    pub converged: bool,
    /// Residual after each restart cycle (GMRES) or iteration (others).
    pub history: Vec<f64>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `b - A x`
pub fn residual(a: &dyn LinearOperator, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut ax = alloc::vec![0.0; b.len()];
    a.apply(x, &mut ax);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Relative residual `|b - Ax| / |b|`, or `|b - Ax|` when `b = 0`.
pub fn relative_residual(a: &dyn LinearOperator, b: &[f64], x: &[f64]) -> f64 {
    let r = norm2(&residual(a, b, x));
    let bn = norm2(b);
    if bn > 0.0 {
        r / bn
    } else {
        r
    }
}

pub(crate) fn check_system(a: &dyn LinearOperator, b: &[f64], x0: &[f64], tol: f64) -> crate::Result<()> {
    if b.len() != a.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
        });
    }
    if x0.len() != a.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: a.dim(),
            found: x0.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(crate::Error::Config(alloc::format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}
