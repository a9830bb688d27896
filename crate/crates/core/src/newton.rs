//! Newton iteration with Krylov inner solves.
//!
//! Each step solves `J(u_n) du = -R(u_n)` with GMRES or BiCGSTAB and sets
//! `u_{n+1} = u_n + damping * du`. The loop stops when either `|R|_2` drops
//! below `tol_residual` or the step norm drops below `tol_step`, and the trace
//! records which test fired.

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;
use alloc::boxed::Box;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::linalg::{bicgstab, gmres, norm2, LinearOperator, SolveStats, SparseMatrix, DEFAULT_RESTART};
use crate::{Error, Result};

/// A square nonlinear system `R(u) = 0`.
pub trait NonlinearProblem {
    fn dim(&self) -> usize;
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>>;
    /// Analytic Jacobian `dR/du` at `u`.
    fn jacobian(&self, u: &[f64]) -> Result<SparseMatrix>;
    /// Norm used for the step-size stopping test.
    fn step_norm(&self, du: &[f64]) -> f64 {
        norm2(du)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    Analytic,
    /// Matrix-free directional differences of the residual.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMethod {
    Gmres { restart: usize },
    Bicgstab,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol_residual: f64,
    pub tol_step: f64,
    pub max_iter: usize,
    pub jacobian_mode: JacobianMode,
    /// Perturbation size for finite differences; `None` uses
    /// `sqrt(eps) * (1 + |u|_2)`.
    pub fd_step: Option<f64>,
    pub damping: f64,
    pub krylov: KrylovMethod,
    /// Relative tolerance of each inner solve.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol_residual: 1e-10,
            tol_step: 1e-12,
            max_iter: 50,
            jacobian_mode: JacobianMode::Analytic,
            fd_step: None,
            damping: 1.0,
            krylov: KrylovMethod::Gmres {
                restart: DEFAULT_RESTART,
            },
            inner_tol: 1e-11,
            inner_max_iter: 20_000,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.tol_residual > 0.0) || !(self.tol_step > 0.0) {
            return bad("Newton tolerances must be positive");
        }
        if self.max_iter == 0 {
            return bad("Newton needs at least one iteration");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0) {
                return bad("finite-difference step must be positive");
            }
        }
        if !(self.inner_tol > 0.0) || self.inner_max_iter == 0 {
            return bad("inner solver needs a positive tolerance and iteration budget");
        }
        if let KrylovMethod::Gmres { restart: 0 } = self.krylov {
            return bad("GMRES restart must be at least 1");
        }
        Ok(())
    }
}

pub fn residual<P: NonlinearProblem + ?Sized>(problem: &P, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: u.len(),
        });
    }
    problem.residual(u)
}

/// Matrix-free `v -> (R(u + h v/|v|) - R(u)) |v| / h`.
pub struct FdJacobian<'a, P: ?Sized> {
    problem: &'a P,
    u: Vec<f64>,
    r0: Vec<f64>,
    step: f64,
    error: RefCell<Option<Error>>,
}

impl<P: NonlinearProblem + ?Sized> FdJacobian<'_, P> {
    /// First residual failure seen while applying the operator.
    pub fn take_error(&self) -> Option<Error> {
        self.error.borrow_mut().take()
    }
}

impl<P: NonlinearProblem + ?Sized> LinearOperator for FdJacobian<'_, P> {
    fn dim(&self) -> usize {
        self.u.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let vn = norm2(x);
        if vn == 0.0 {
            y.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let scale = self.step / vn;
        let shifted: Vec<f64> = self.u.iter().zip(x).map(|(u, v)| u + scale * v).collect();
        match self.problem.residual(&shifted) {
            Ok(r) => {
                for i in 0..y.len() {
                    y[i] = (r[i] - self.r0[i]) / scale;
                }
            }
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                y.iter_mut().for_each(|v| *v = f64::NAN);
            }
        }
    }
}

/// Jacobian at a point, assembled or matrix-free.
pub enum Jacobian<'a, P: ?Sized> {
    Assembled(SparseMatrix),
    FiniteDifference(FdJacobian<'a, P>),
}

impl<P: NonlinearProblem + ?Sized> LinearOperator for Jacobian<'_, P> {
    fn dim(&self) -> usize {
        match self {
            Jacobian::Assembled(m) => m.nrows(),
            Jacobian::FiniteDifference(f) => f.dim(),
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Jacobian::Assembled(m) => m.apply(x, y),
            Jacobian::FiniteDifference(f) => f.apply(x, y),
        }
    }
}

impl<P: ?Sized> Jacobian<'_, P> {
    fn take_error(&self) -> Option<Error> {
        match self {
            Jacobian::Assembled(_) => None,
            Jacobian::FiniteDifference(f) => f.error.borrow_mut().take(),
        }
    }
}

pub fn jacobian<'a, P: NonlinearProblem + ?Sized>(
    problem: &'a P,
    u: &[f64],
    mode: JacobianMode,
    fd_step: Option<f64>,
) -> Result<Jacobian<'a, P>> {
    match mode {
        JacobianMode::Analytic => Ok(Jacobian::Assembled(problem.jacobian(u)?)),
        JacobianMode::FiniteDifference => {
            let step = match fd_step {
                Some(h) if h > 0.0 => h,
                Some(h) => return Err(Error::Config(alloc::format!("finite-difference step {h} must be positive"))),
                None => f64::EPSILON.sqrt() * (1.0 + norm2(u)),
            };
            Ok(Jacobian::FiniteDifference(FdJacobian {
                problem,
                u: u.to_vec(),
                r0: residual(problem, u)?,
                step,
                error: RefCell::new(None),
            }))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonState {
    pub iteration: usize,
    pub residual_norm: f64,
    /// Norm of the applied update; absent for the initial state.
    pub step_norm: Option<f64>,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Residual,
    Step,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub trace: Vec<NewtonState>,
    pub stop: StopReason,
}

impl NewtonOutcome {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::MaxIterations
    }

    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |s| s.iteration)
    }

    pub fn residual_norm(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |s| s.residual_norm)
    }

    pub fn inner_iterations(&self) -> usize {
        self.trace.iter().map(|s| s.inner_iterations).sum()
    }
}

fn inner_solve(
    op: &dyn LinearOperator,
    rhs: &[f64],
    config: &NewtonConfig,
) -> Result<(Vec<f64>, SolveStats)> {
    let x0 = alloc::vec![0.0; rhs.len()];
    match config.krylov {
        KrylovMethod::Gmres { restart } => gmres(op, rhs, &x0, config.inner_tol, config.inner_max_iter, restart),
        KrylovMethod::Bicgstab => bicgstab(op, rhs, &x0, config.inner_tol, config.inner_max_iter),
    }
}

/// Runs Newton from `u0`. Running out of iterations is reported through
/// [`StopReason::MaxIterations`]; inner breakdowns are returned as
/// [`Error::Newton`] with the outer iteration number.
pub fn newton_krylov_solve<P: NonlinearProblem + ?Sized>(
    problem: &P,
    u0: &[f64],
    config: &NewtonConfig,
) -> Result<NewtonOutcome> {
    config.validate()?;
    if let Some(i) = u0.iter().position(|v| !v.is_finite()) {
        return Err(Error::Config(alloc::format!("initial guess entry {i} is not finite")));
    }
    let mut u = u0.to_vec();
    let mut r = residual(problem, &u)?;
    let mut trace = alloc::vec![NewtonState {
        iteration: 0,
        residual_norm: norm2(&r),
        step_norm: None,
        inner_iterations: 0,
    }];
    if norm2(&r) <= config.tol_residual {
        return Ok(NewtonOutcome { u, trace, stop: StopReason::Residual });
    }

    let wrap = |iteration: usize, e: Error| Error::Newton {
        iteration,
        source: Box::new(e),
    };
    for n in 1..=config.max_iter {
        let j = jacobian(problem, &u, config.jacobian_mode, config.fd_step).map_err(|e| wrap(n, e))?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let solved = inner_solve(&j, &rhs, config);
        if let Some(e) = j.take_error() {
            return Err(wrap(n, e));
        }
        let (du, stats) = solved.map_err(|e| wrap(n, e))?;
        for (ui, di) in u.iter_mut().zip(&du) {
            *ui += config.damping * di;
        }
        let applied: Vec<f64> = du.iter().map(|d| config.damping * d).collect();
        let step = problem.step_norm(&applied);
        r = residual(problem, &u).map_err(|e| wrap(n, e))?;
        let rn = norm2(&r);
        trace.push(NewtonState {
            iteration: n,
            residual_norm: rn,
            step_norm: Some(step),
            inner_iterations: stats.iterations,
        });
        if rn <= config.tol_residual {
            return Ok(NewtonOutcome { u, trace, stop: StopReason::Residual });
        }
        if step < config.tol_step {
            return Ok(NewtonOutcome { u, trace, stop: StopReason::Step });
        }
    }
    Ok(NewtonOutcome {
        u,
        trace,
        stop: StopReason::MaxIterations,
    })
}
