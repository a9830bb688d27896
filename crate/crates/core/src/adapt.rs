//! Gradient-driven adaptive refinement.
//!
//! Each generation solves on the current mesh, computes `eta_K = |grad u_h|`
//! per element, marks elements, refines them and carries the solution over as
//! the next warm start.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;

use crate::fem::{FemProblem, NodeConstraint};
use crate::mesh::{element_gradient, Mesh};
use crate::newton::{newton_krylov_solve, NewtonConfig};
use crate::quadrature::QuadratureRule;
use crate::{Error, ProblemSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig {
    /// Gradient threshold for absolute marking.
    pub epsilon: f64,
    /// Stop once the L2 error (when an exact solution is known) drops below this.
    pub delta: f64,
    pub max_generations: usize,
    /// Mark this fraction of elements with the largest indicators instead of
    /// thresholding against `epsilon`.
    pub marking_fraction: Option<f64>,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            epsilon: 1.0,
            delta: 1e-4,
            max_generations: 5,
            marking_fraction: None,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if let Some(f) = self.marking_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("marking fraction must lie in (0, 1], got {f}")));
            }
        }
        Ok(())
    }
}

/// `||u - u_h||_{L2}` where `u_h` is the P1 interpolant of nodal values.
///
/// Every element is split into its four red children and each child is
/// integrated with the degree-4 rule.
pub fn error_function(u_h: &[f64], exact: impl Fn(f64, f64) -> f64, mesh: &Mesh) -> Result<f64> {
    if u_h.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_nodes(),
            found: u_h.len(),
        });
    }
    let rule = QuadratureRule::triangle(4)?;
    // Barycentric corners of the four children.
    const M: f64 = 0.5;
    const SUB: [[[f64; 3]; 3]; 4] = [
        [[1.0, 0.0, 0.0], [M, M, 0.0], [M, 0.0, M]],
        [[M, M, 0.0], [0.0, 1.0, 0.0], [0.0, M, M]],
        [[M, 0.0, M], [0.0, M, M], [0.0, 0.0, 1.0]],
        [[0.0, M, M], [M, 0.0, M], [M, M, 0.0]],
    ];
    let mut sum = 0.0;
    for e in mesh.elements() {
        let verts = mesh.vertices(e.id);
        let vals = e.nodes.map(|n| u_h[n]);
        let quarter = mesh.area(e.id) / 4.0;
        for child in &SUB {
            for (q, &w) in rule.points.iter().zip(rule.weights) {
                let l = [1.0 - q[0] - q[1], q[0], q[1]];
                let mut b = [0.0; 3];
                for (c, lc) in child.iter().zip(l) {
                    for k in 0..3 {
                        b[k] += lc * c[k];
                    }
                }
                let x = b[0] * verts[0][0] + b[1] * verts[1][0] + b[2] * verts[2][0];
                let y = b[0] * verts[0][1] + b[1] * verts[1][1] + b[2] * verts[2][1];
                let uh = b[0] * vals[0] + b[1] * vals[1] + b[2] * vals[2];
                let d = exact(x, y) - uh;
                sum += w * 2.0 * quarter * d * d;
            }
        }
    }
    Ok(sum.sqrt())
}

/// Per-element `|grad u_h|`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    pub values: Vec<f64>,
}

pub fn compute_indicators(u_h: &[f64], mesh: &Mesh) -> Result<IndicatorField> {
    let values = (0..mesh.num_elements())
        .map(|e| {
            let g = element_gradient(mesh, u_h, e)?;
            Ok(g[0].hypot(g[1]))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(IndicatorField { values })
}

/// Elements with `eta > epsilon`, or the `ceil(fraction * n)` largest
/// indicators (ties broken by element id) when a fraction is configured.
/// Elements with a zero indicator are never marked.
pub fn mark(indicators: &IndicatorField, config: &RefinementConfig) -> BTreeSet<usize> {
    let eta = &indicators.values;
    match config.marking_fraction {
        None => (0..eta.len()).filter(|&k| eta[k] > config.epsilon).collect(),
        Some(fraction) => {
            let mut order: Vec<usize> = (0..eta.len()).filter(|&k| eta[k] > 0.0).collect();
            order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
            let count = (fraction * eta.len() as f64).ceil() as usize;
            order.into_iter().take(count).collect()
        }
    }
}

/// Evaluates the old P1 interpolant at every node of `new_mesh`. Nodes that
/// keep their id and position copy the old value exactly.
pub fn interpolate_to_new_mesh(u_h: &[f64], old_mesh: &Mesh, new_mesh: &Mesh) -> Result<Vec<f64>> {
    if u_h.len() != old_mesh.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: old_mesh.num_nodes(),
            found: u_h.len(),
        });
    }
    new_mesh
        .nodes()
        .iter()
        .map(|n| {
            if n.id < old_mesh.num_nodes() && old_mesh.point(n.id) == [n.x, n.y] {
                return Ok(u_h[n.id]);
            }
            let (e, bary) = old_mesh.locate(n.x, n.y).ok_or(Error::OutsideMesh { x: n.x, y: n.y })?;
            let nodes = old_mesh.elements()[e].nodes;
            Ok(bary[0] * u_h[nodes[0]] + bary[1] * u_h[nodes[1]] + bary[2] * u_h[nodes[2]])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub generation: usize,
    pub elements: usize,
    pub nodes: usize,
    pub marked: usize,
    /// Absent when the problem has no exact solution.
    pub l2_error: Option<f64>,
    pub newton_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptStop {
    /// No element was marked.
    NoMarks,
    /// The L2 error fell below `delta`.
    Tolerance,
    MaxGenerations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveReport {
    pub generations: Vec<GenerationReport>,
    pub stop: AdaptStop,
}

/// What a per-generation solver hands back to the refinement loop.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSolve {
    pub u: Vec<f64>,
    pub newton_iterations: usize,
    pub converged: bool,
}

/// Refinement loop around an arbitrary solver. `solve` receives the mesh
/// and, after the first generation, the previous solution interpolated onto
/// it.
pub fn adaptive_loop<S>(
    initial_mesh: &Mesh,
    exact: Option<&dyn Fn(f64, f64) -> f64>,
    config: &RefinementConfig,
    mut solve: S,
) -> Result<(Vec<f64>, Mesh, AdaptiveReport)>
where
    S: FnMut(&Mesh, Option<&[f64]>) -> Result<GenerationSolve>,
{
    config.validate()?;
    let mut mesh = initial_mesh.clone();
    let mut warm: Option<Vec<f64>> = None;
    let mut generations = Vec::new();
    loop {
        let generation = generations.len();
        let result = solve(&mesh, warm.as_deref())?;
        let l2_error = match exact {
            Some(f) => Some(error_function(&result.u, f, &mesh)?),
            None => None,
        };
        let marked = mark(&compute_indicators(&result.u, &mesh)?, config);
        generations.push(GenerationReport {
            generation,
            elements: mesh.num_elements(),
            nodes: mesh.num_nodes(),
            marked: marked.len(),
            l2_error,
            newton_iterations: result.newton_iterations,
            converged: result.converged,
        });
        let stop = if l2_error.is_some_and(|e| e < config.delta) {
            Some(AdaptStop::Tolerance)
        } else if marked.is_empty() {
            Some(AdaptStop::NoMarks)
        } else if generation >= config.max_generations {
            Some(AdaptStop::MaxGenerations)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok((result.u, mesh, AdaptiveReport { generations, stop }));
        }
        let refined = mesh.refine(&marked)?;
        warm = Some(interpolate_to_new_mesh(&result.u, &mesh, &refined)?);
        mesh = refined;
    }
}

/// One Newton-Krylov finite-element solve, warm-started from `warm` with the
/// Dirichlet values of the mesh reimposed.
pub fn fem_generation(
    spec: &ProblemSpec,
    mesh: &Mesh,
    warm: Option<&[f64]>,
    newton: &NewtonConfig,
) -> Result<GenerationSolve> {
    let problem = FemProblem::new(mesh, spec)?;
    let u0 = match warm {
        None => problem.initial_guess(),
        Some(w) => {
            let mut u = w.to_vec();
            for (&node, c) in problem.constraints() {
                if let NodeConstraint::Dirichlet(v) = *c {
                    u[node] = v;
                }
            }
            u
        }
    };
    let outcome = newton_krylov_solve(&problem, &u0, newton)?;
    Ok(GenerationSolve {
        newton_iterations: outcome.iterations(),
        converged: outcome.converged(),
        u: outcome.u,
    })
}

/// Adaptive finite-element solve of `spec`. The L2 error is tracked (and the
/// `delta` stop applies) only when `spec` carries an exact solution.
pub fn adaptive_solve(
    spec: &ProblemSpec,
    initial_mesh: &Mesh,
    newton: &NewtonConfig,
    refine: &RefinementConfig,
) -> Result<(Vec<f64>, Mesh, AdaptiveReport)> {
    let exact = spec.exact;
    let f = move |x: f64, y: f64| exact.map_or(0.0, |e| e.value(x, y));
    let exact_ref: Option<&dyn Fn(f64, f64) -> f64> = if exact.is_some() { Some(&f) } else { None };
    adaptive_loop(initial_mesh, exact_ref, refine, |mesh, warm| {
        fem_generation(spec, mesh, warm, newton)
    })
}
