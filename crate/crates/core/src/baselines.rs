//! Comparison iterations and the error-difference table.
//!
//! Both iterations run a fixed budget on an assembled linear system and
//! record a caller-supplied error measure at checkpoint iterations.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;

use crate::linalg::{gauss_seidel_sweep, SparseMatrix};
use crate::{Error, Result};

/// `1, 100, 1000, 5000, 10^4, 5*10^4, ...` up to and including `budget`.
pub fn checkpoints(budget: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if budget == 0 {
        return out;
    }
    out.push(1);
    let mut decade = 100usize;
    loop {
        for c in [decade, 5 * decade] {
            if c == 500 {
                continue;
            }
            if c < budget && c > *out.last().unwrap() {
                out.push(c);
            }
        }
        if decade >= budget {
            break;
        }
        decade *= 10;
    }
    if *out.last().unwrap() != budget {
        out.push(budget);
    }
    out
}

/// Iterate and error history of one baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRun {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// `(iteration, error)` at each checkpoint.
    pub trace: Vec<(usize, f64)>,
}

impl IterationRun {
    pub fn final_error(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.1)
    }
}

fn check(a: &SparseMatrix, b: &[f64], x0: &[f64]) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if b.len() != n { b.len() } else { x0.len() },
        });
    }
    Ok(())
}

/// Forward Gauss-Seidel sweeps for exactly `budget` iterations.
pub fn gauss_seidel_run(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    budget: usize,
    mut error: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<IterationRun> {
    check(a, b, x0)?;
    let diag = a.diagonal();
    if let Some(row) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::SingularDiagonal { row });
    }
    let marks = checkpoints(budget);
    let mut next = 0;
    let mut u = x0.to_vec();
    let mut trace = Vec::with_capacity(marks.len());
    for it in 1..=budget {
        gauss_seidel_sweep(a, &diag, b, &mut u);
        if marks.get(next) == Some(&it) {
            trace.push((it, error(&u)?));
            next += 1;
        }
    }
    Ok(IterationRun { u, iterations: budget, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelaxationScheme {
    /// `u <- u + dt (F - K u)` with `dt = 1 / max_i sum_j |K_ij|`.
    FirstOrder,
    /// Damped fictitious motion `M u'' + c M u' + K u = F` with central
    /// differences, diagonal mass `m_i = sum_j |K_ij| / 3.5`, unit time step,
    /// and damping re-estimated every step from the Rayleigh quotient of the
    /// current velocity. The mass keeps every mode strictly below the
    /// central-difference stability limit `omega = 2`, where one root of the
    /// damped recurrence stays at `-1`.
    #[default]
    SecondOrder,
}

/// Dynamic relaxation for exactly `budget` iterations.
pub fn dynamic_relaxation_run(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    budget: usize,
    scheme: RelaxationScheme,
    mut error: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<IterationRun> {
    check(a, b, x0)?;
    let n = a.nrows();
    let row_sums: Vec<f64> = (0..n).map(|i| a.row(i).map(|(_, v)| v.abs()).sum()).collect();
    if let Some(row) = row_sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::SingularDiagonal { row });
    }
    let marks = checkpoints(budget);
    let mut next = 0;
    let mut u = x0.to_vec();
    let mut trace = Vec::with_capacity(marks.len());
    let mut r = alloc::vec![0.0; n];
    match scheme {
        RelaxationScheme::FirstOrder => {
            let dt = 1.0 / row_sums.iter().fold(0.0f64, |m, &s| m.max(s));
            for it in 1..=budget {
                a.mul_vec_into(&u, &mut r);
                for i in 0..n {
                    u[i] += dt * (b[i] - r[i]);
                }
                if marks.get(next) == Some(&it) {
                    trace.push((it, error(&u)?));
                    next += 1;
                }
            }
        }
        RelaxationScheme::SecondOrder => {
            let mass: Vec<f64> = row_sums.iter().map(|s| s / 3.5).collect();
            let mut v = alloc::vec![0.0; n];
            let mut kv = alloc::vec![0.0; n];
            let mut c = 0.0f64;
            for it in 1..=budget {
                a.mul_vec_into(&u, &mut r);
                for i in 0..n {
                    v[i] = ((1.0 - 0.5 * c) * v[i] + (b[i] - r[i]) / mass[i]) / (1.0 + 0.5 * c);
                    u[i] += v[i];
                }
                a.mul_vec_into(&v, &mut kv);
                let vkv: f64 = v.iter().zip(&kv).map(|(x, y)| x * y).sum();
                let vmv: f64 = v.iter().zip(&mass).map(|(x, m)| m * x * x).sum();
                if vmv > 0.0 && vkv > 0.0 {
                    c = (2.0 * (vkv / vmv).sqrt()).min(1.9);
                }
                if marks.get(next) == Some(&it) {
                    trace.push((it, error(&u)?));
                    next += 1;
                }
            }
        }
    }
    Ok(IterationRun { u, iterations: budget, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateLabel {
    Fast,
    Moderate,
    Slow,
}

impl RateLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateLabel::Fast => "Fast",
            RateLabel::Moderate => "Moderate",
            RateLabel::Slow => "Slow",
        }
    }
}

/// Least-squares slope of `log(error)` against `log(iteration)`; `None` with
/// fewer than two usable points.
pub fn convergence_slope(trace: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|(it, e)| *it > 0 && *e > 0.0 && e.is_finite())
        .map(|&(it, e)| ((it as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// `Fast` for slopes at or below -1, `Moderate` down to -0.5, else `Slow`.
/// A method that converges within its first checkpoint has no slope and
/// counts as `Fast`.
pub fn rate_label(slope: Option<f64>) -> RateLabel {
    match slope {
        None => RateLabel::Fast,
        Some(s) if s <= -1.0 => RateLabel::Fast,
        Some(s) if s <= -0.5 => RateLabel::Moderate,
        Some(_) => RateLabel::Slow,
    }
}

/// Pairwise `|E_i - E_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    pub methods: Vec<String>,
    pub errors: Vec<f64>,
}

impl DeltaTable {
    pub fn new(entries: impl IntoIterator<Item = (String, f64)>) -> DeltaTable {
        let (methods, errors) = entries.into_iter().unzip();
        DeltaTable { methods, errors }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.errors[i] - self.errors[j]).abs()
    }

    /// Unordered pairs `(i, j, delta)` with `i < j`, in row order.
    pub fn pairs(&self) -> Vec<(usize, usize, f64)> {
        let n = self.errors.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push((i, j, self.get(i, j)));
            }
        }
        out
    }

    pub fn by_name(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        Some(self.get(i, j))
    }
}
