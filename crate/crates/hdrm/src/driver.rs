//! Runs the solvers on a problem file and collects comparable reports.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use hdrm_core::adapt::{error_function, AdaptiveReport};
use hdrm_core::baselines::{
    convergence_slope, dynamic_relaxation_run, gauss_seidel_run, rate_label, DeltaTable, IterationRun, RateLabel,
};
use hdrm_core::fem::FemProblem;
use hdrm_core::hybrid::{hdrm_solve, hybrid_solve, RegionPartition};
use hdrm_core::linalg::norm2;
use hdrm_core::newton::NewtonState;
use hdrm_core::Mesh;

use crate::error::{DriverError, Issue, Result};
use crate::mesh_io::read_mesh;
use crate::problem_file::{MeshSource, ProblemFile};

/// Relative residual below which a fixed-budget iteration counts as converged.
pub const ITERATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Hdrm,
    GaussSeidel,
    DynamicRelaxation,
    DualReciprocity,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hdrm, Method::GaussSeidel, Method::DynamicRelaxation, Method::DualReciprocity];

    /// Identifier used in problem files, on the command line and in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            Method::Hdrm => "hdrm",
            Method::GaussSeidel => "gauss_seidel",
            Method::DynamicRelaxation => "dynamic_relaxation",
            Method::DualReciprocity => "dual_reciprocity",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Hdrm => "H-DRM",
            Method::GaussSeidel => "Gauss-Seidel",
            Method::DynamicRelaxation => "Dynamic Relaxation",
            Method::DualReciprocity => "Dual Reciprocity",
        }
    }

    /// Methods whose iteration count is a fixed budget rather than a
    /// convergence test.
    pub fn is_fixed_budget(&self) -> bool {
        matches!(self, Method::GaussSeidel | Method::DynamicRelaxation)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Method, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected hdrm, gauss_seidel, dynamic_relaxation or dual_reciprocity)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub method: Method,
    /// L2 error of the final solution; `None` without an exact solution.
    pub final_error: Option<f64>,
    pub iterations: usize,
    /// `(iteration, L2 error)` pairs; empty without an exact solution.
    pub trace: Vec<(usize, f64)>,
    pub rate: RateLabel,
    pub converged: bool,
    pub wall_time: Duration,
    /// Mesh carrying the final solution (refined for `hdrm`).
    pub mesh: Mesh,
    pub u: Vec<f64>,
    pub newton_trace: Vec<NewtonState>,
    /// Per-generation refinement history of `hdrm` runs.
    pub adapt: Option<AdaptiveReport>,
}

pub fn build_mesh(problem: &ProblemFile) -> Result<Mesh> {
    match &problem.mesh {
        MeshSource::Structured { nx, ny } => match problem.spec.domain {
            hdrm_core::problem::Domain::Rectangle(c) => Ok(Mesh::rectangle(*nx, *ny, c)?),
            hdrm_core::problem::Domain::Polygon(_) => Err(DriverError::Validation(vec![Issue::general(
                "a structured mesh needs a rectangle domain",
            )])),
        },
        MeshSource::File(path) => {
            let mesh = read_mesh(path)?;
            let segments = problem.spec.domain.num_segments() as u32;
            let bad: BTreeSet<u32> = mesh.boundary_edges().iter().map(|e| e.marker).filter(|&m| m >= segments).collect();
            if !bad.is_empty() {
                return Err(DriverError::Validation(vec![Issue::general(format!(
                    "mesh {} carries boundary markers {bad:?} beyond the domain's {segments} segments",
                    path.display()
                ))]));
            }
            Ok(mesh)
        }
    }
}

fn l2_error(problem: &ProblemFile, mesh: &Mesh, u: &[f64]) -> Result<Option<f64>> {
    match problem.spec.exact {
        Some(e) => Ok(Some(error_function(u, |x, y| e.value(x, y), mesh)?)),
        None => Ok(None),
    }
}

/// Runs one method on a freshly built mesh.
pub fn run_method(problem: &ProblemFile, method: Method) -> Result<SolverReport> {
    let mesh = build_mesh(problem)?;
    run_method_on(problem, &mesh, method)
}

/// Runs one method on `mesh`.
///
/// Gauss-Seidel and dynamic relaxation iterate the assembled finite-element
/// system (nonlinear boundary nodes pinned to the root of their law) from a
/// zero start for exactly the configured budget, recording the error at the
/// checkpoint iterations. `dual_reciprocity` is a boundary-element solve on
/// the mesh boundary with the interior mesh nodes as collocation points.
/// `hdrm` is the adaptive hybrid pipeline; its trace holds one point per
/// refinement generation at the cumulative Newton iteration count.
pub fn run_method_on(problem: &ProblemFile, mesh: &Mesh, method: Method) -> Result<SolverReport> {
    let spec = &problem.spec;
    let start = Instant::now();
    log::info!("running {method} on {} nodes", mesh.num_nodes());
    let report = match method {
        Method::GaussSeidel | Method::DynamicRelaxation => {
            let fem = FemProblem::new(mesh, spec)?;
            let system = fem.linear_system()?;
            let x0 = vec![0.0; mesh.num_nodes()];
            let exact = spec.exact;
            let measure = |u: &[f64]| match exact {
                Some(e) => error_function(u, |x, y| e.value(x, y), mesh),
                None => Ok(f64::NAN),
            };
            let run: IterationRun = if method == Method::GaussSeidel {
                gauss_seidel_run(&system.k, &system.f, &x0, problem.budget, measure)?
            } else {
                dynamic_relaxation_run(&system.k, &system.f, &x0, problem.budget, problem.relaxation, measure)?
            };
            let ku = system.k.mul_vec(&run.u);
            let r: Vec<f64> = system.f.iter().zip(&ku).map(|(f, k)| f - k).collect();
            let relative = norm2(&r) / norm2(&system.f).max(f64::MIN_POSITIVE);
            let trace: Vec<(usize, f64)> = if exact.is_some() { run.trace.clone() } else { Vec::new() };
            SolverReport {
                method,
                final_error: exact.map(|_| run.final_error()),
                iterations: run.iterations,
                rate: rate_label(convergence_slope(&trace)),
                trace,
                converged: relative <= ITERATION_TOLERANCE,
                wall_time: Duration::ZERO,
                mesh: mesh.clone(),
                u: run.u,
                newton_trace: Vec::new(),
                adapt: None,
            }
        }
        Method::DualReciprocity => {
            let partition = RegionPartition::from_fem_elements(mesh, BTreeSet::new())?;
            let sol = hybrid_solve(spec, mesh, &partition, &problem.config.hybrid)?;
            let iterations = sol.newton_iterations.max(1);
            let final_error = l2_error(problem, mesh, &sol.u)?;
            let trace: Vec<(usize, f64)> = final_error.map(|e| (iterations, e)).into_iter().collect();
            SolverReport {
                method,
                final_error,
                iterations,
                rate: rate_label(convergence_slope(&trace)),
                trace,
                converged: sol.converged,
                wall_time: Duration::ZERO,
                mesh: mesh.clone(),
                u: sol.u,
                newton_trace: sol.newton_trace,
                adapt: None,
            }
        }
        Method::Hdrm => {
            let (u, fine, adapt, last) = hdrm_solve(spec, mesh, &problem.config)?;
            let mut total = 0;
            let mut trace = Vec::new();
            for g in &adapt.generations {
                // Keep iteration stamps strictly increasing even for a
                // generation that needed no Newton step.
                total = (total + g.newton_iterations).max(total + 1);
                if let Some(e) = g.l2_error {
                    trace.push((total, e));
                }
            }
            SolverReport {
                method,
                final_error: adapt.generations.last().and_then(|g| g.l2_error),
                iterations: total,
                rate: rate_label(convergence_slope(&trace)),
                trace,
                converged: adapt.generations.iter().all(|g| g.converged),
                wall_time: Duration::ZERO,
                mesh: fine,
                u,
                newton_trace: last.newton_trace,
                adapt: Some(adapt),
            }
        }
    };
    let wall_time = start.elapsed();
    log::info!(
        "{method}: error {:?} after {} iterations in {:.3} s",
        report.final_error,
        report.iterations,
        wall_time.as_secs_f64()
    );
    Ok(SolverReport { wall_time, ..report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub reports: Vec<SolverReport>,
    /// Pairwise differences of the final errors, in method-list order.
    pub delta: DeltaTable,
}

impl BenchmarkReport {
    pub fn from_reports(reports: Vec<SolverReport>) -> BenchmarkReport {
        let delta = DeltaTable::new(
            reports
                .iter()
                .map(|r| (r.method.name().to_string(), r.final_error.unwrap_or(f64::NAN))),
        );
        BenchmarkReport { reports, delta }
    }

    /// Methods that stop on a convergence test and failed it. Fixed-budget
    /// iterations are expected to stop short and are not listed.
    pub fn unconverged(&self) -> Vec<Method> {
        self.reports
            .iter()
            .filter(|r| !r.method.is_fixed_budget() && !r.converged)
            .map(|r| r.method)
            .collect()
    }
}

/// Runs every listed method (concurrently, one thread each) on a shared mesh.
/// Errors need an exact solution, so one is required.
pub fn compare_methods(problem: &ProblemFile) -> Result<BenchmarkReport> {
    if problem.spec.exact.is_none() {
        return Err(DriverError::Validation(vec![Issue::general(
            "comparing methods needs an [exact] solution to measure errors against",
        )]));
    }
    let mesh = build_mesh(problem)?;
    let results: Vec<Result<SolverReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = problem
            .methods
            .iter()
            .map(|&m| {
                let mesh = &mesh;
                s.spawn(move || run_method_on(problem, mesh, m))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect()
    });
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkReport::from_reports(reports))
}
