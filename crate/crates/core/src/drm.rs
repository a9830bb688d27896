//! Constant-element boundary integrals for the Laplacian with dual-reciprocity
//! treatment of the source term.
//!
//! With the fundamental solution `G*(x, p) = -ln|x - p| / (2 pi)` and
//! `Q* = dG*/dn`, every collocation point `p` satisfies
//!
//! ```text
//! c(p) u(p) + int u Q* - int q G* = -int_Omega G* lap(u)
//! ```
//!
//! The Laplacian is expanded as `sum_k alpha_k (1 + r_k)`, whose particular
//! solutions `r^2/4 + r^3/9` move the domain integral onto the boundary:
//! `H u - G q = (H U - G Q) alpha`. All segment integrals are evaluated in
//! closed form, so points close to the boundary need no special treatment.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;

use crate::linalg::{DenseMatrix, LuFactorization};
use crate::mesh::{edge_key, Mesh};
use crate::newton::NewtonState;
use crate::problem::{BoundaryCondition, Diffusion, PowerLaw, ProblemSpec, Reaction};
use crate::{Error, Result};

/// Marker given to boundary elements that lie on a subdomain interface.
pub const INTERFACE_MARKER: u32 = u32::MAX;

/// `-ln(r) / (2 pi)`.
pub fn fundamental_solution(x: [f64; 2], xi: [f64; 2]) -> Result<f64> {
    let r = (x[0] - xi[0]).hypot(x[1] - xi[1]);
    if r == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(-r.ln() / (2.0 * PI))
}

/// A straight constant element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryElement {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub midpoint: [f64; 2],
    /// Unit outward normal (the domain lies to the left of `start -> end`).
    pub normal: [f64; 2],
    pub length: f64,
    pub marker: u32,
    /// Parent mesh edge when built from a mesh.
    pub origin: Option<EdgeOrigin>,
}

/// Position of a boundary element on the mesh edge it was cut from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeOrigin {
    /// Mesh nodes at the edge ends, in traversal order.
    pub nodes: [usize; 2],
    /// Parameter range `t0 < t1` within `[0, 1]` along the edge.
    pub t0: f64,
    pub t1: f64,
}

impl EdgeOrigin {
    /// Mesh nodes this element touches (an edge end it reaches).
    pub fn touched_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        let first = (self.t0 == 0.0).then_some(self.nodes[0]);
        let last = (self.t1 == 1.0).then_some(self.nodes[1]);
        first.into_iter().chain(last)
    }

    /// Linear interpolation of nodal values at the element midpoint.
    pub fn midpoint_value(&self, u: &[f64]) -> f64 {
        let t = 0.5 * (self.t0 + self.t1);
        (1.0 - t) * u[self.nodes[0]] + t * u[self.nodes[1]]
    }
}

impl BoundaryElement {
    pub fn new(start: [f64; 2], end: [f64; 2], marker: u32) -> BoundaryElement {
        let (dx, dy) = (end[0] - start[0], end[1] - start[1]);
        let length = dx.hypot(dy);
        BoundaryElement {
            start,
            end,
            midpoint: [0.5 * (start[0] + end[0]), 0.5 * (start[1] + end[1])],
            normal: [dy / length, -dx / length],
            length,
            marker,
            origin: None,
        }
    }

    /// `(int G* ds, int Q* ds)` over this element for the source point `p`.
    pub fn integrals(&self, p: [f64; 2]) -> (f64, f64) {
        let t = [-self.normal[1], self.normal[0]];
        let a = [self.start[0] - p[0], self.start[1] - p[1]];
        let s1 = a[0] * t[0] + a[1] * t[1];
        let s2 = s1 + self.length;
        let d = a[0] * self.normal[0] + a[1] * self.normal[1];
        // Signed angle subtended by the segment at p.
        let theta = if d.abs() <= 1e-14 * self.length { 0.0 } else { (d * (s2 - s1)).atan2(d * d + s1 * s2) };
        let prim = |s: f64| {
            let r2 = s * s + d * d;
            if r2 == 0.0 {
                0.0
            } else {
                0.5 * s * r2.ln() - s
            }
        };
        let log_integral = prim(s2) - prim(s1) + d * theta;
        (-log_integral / (2.0 * PI), -theta / (2.0 * PI))
    }
}

/// Closed chain(s) of constant elements around a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDiscretization {
    elements: Vec<BoundaryElement>,
}

impl BoundaryDiscretization {
    pub fn new(elements: Vec<BoundaryElement>) -> Result<BoundaryDiscretization> {
        if elements.len() < 3 {
            return Err(Error::InvalidDiscretization(format!(
                "need at least 3 boundary elements, got {}",
                elements.len()
            )));
        }
        for (i, e) in elements.iter().enumerate() {
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(Error::InvalidDiscretization(format!("element {i} has zero length")));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &elements {
            if !seen.insert((e.midpoint[0].to_bits(), e.midpoint[1].to_bits())) {
                return Err(Error::InvalidDiscretization(format!(
                    "coincident collocation points at ({}, {})",
                    e.midpoint[0], e.midpoint[1]
                )));
            }
        }
        Ok(BoundaryDiscretization { elements })
    }

    /// Splits side `i` of a counter-clockwise polygon into `per_side` equal
    /// elements carrying marker `i`.
    pub fn from_polygon(vertices: &[[f64; 2]], per_side: usize) -> Result<BoundaryDiscretization> {
        if per_side == 0 {
            return Err(Error::InvalidDiscretization("per_side must be at least 1".into()));
        }
        let n = vertices.len();
        let mut elements = Vec::with_capacity(n * per_side);
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            for k in 0..per_side {
                let t0 = k as f64 / per_side as f64;
                let t1 = (k + 1) as f64 / per_side as f64;
                let p = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                elements.push(BoundaryElement::new(p(t0), p(t1), i as u32));
            }
        }
        BoundaryDiscretization::new(elements)
    }

    pub fn rectangle(corners: [f64; 4], per_side: usize) -> Result<BoundaryDiscretization> {
        let [x0, y0, x1, y1] = corners;
        BoundaryDiscretization::from_polygon(&[[x0, y0], [x1, y0], [x1, y1], [x0, y1]], per_side)
    }

    /// Boundary of the union of `region` (all elements when `None`), one
    /// constant element per mesh edge. Edges on the mesh boundary keep their
    /// marker; interior edges get [`INTERFACE_MARKER`]. Loops are listed in
    /// order of their smallest start node, each traversed with the region on
    /// the left. Regions that touch themselves at a vertex are accepted.
    pub fn from_mesh(mesh: &Mesh, region: Option<&BTreeSet<usize>>) -> Result<BoundaryDiscretization> {
        BoundaryDiscretization::from_mesh_subdivided(mesh, region, 1)
    }

    /// Like [`BoundaryDiscretization::from_mesh`] with every mesh edge split
    /// into `per_edge` equal elements.
    pub fn from_mesh_subdivided(
        mesh: &Mesh,
        region: Option<&BTreeSet<usize>>,
        per_edge: usize,
    ) -> Result<BoundaryDiscretization> {
        if per_edge == 0 {
            return Err(Error::InvalidDiscretization("per_edge must be at least 1".into()));
        }
        let mut count: BTreeMap<(usize, usize), ([usize; 2], usize)> = BTreeMap::new();
        for e in mesh.elements() {
            if region.is_some_and(|r| !r.contains(&e.id)) {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (e.nodes[k], e.nodes[(k + 1) % 3]);
                count.entry(edge_key(a, b)).and_modify(|v| v.1 += 1).or_insert(([a, b], 1));
            }
        }
        if let Some(r) = region {
            if let Some(&bad) = r.iter().find(|&&id| id >= mesh.num_elements()) {
                return Err(Error::ElementNotFound(bad));
            }
        }
        let markers: BTreeMap<(usize, usize), u32> = mesh
            .boundary_edges()
            .iter()
            .map(|e| (edge_key(e.nodes[0], e.nodes[1]), e.marker))
            .collect();
        // Outgoing boundary edges per node. A node where the region touches
        // itself at a single vertex has two.
        let mut next: BTreeMap<usize, Vec<([usize; 2], u32)>> = BTreeMap::new();
        for (key, (oriented, c)) in &count {
            if *c == 1 {
                let marker = markers.get(key).copied().unwrap_or(INTERFACE_MARKER);
                next.entry(oriented[0]).or_default().push((*oriented, marker));
            }
        }
        let mut elements = Vec::new();
        // Every node has as many incoming as outgoing boundary edges, so a
        // walk taking the first unused outgoing edge returns to its start.
        while let Some(&start) = next.keys().next() {
            let mut node = start;
            loop {
                let Some(out) = next.get_mut(&node) else {
                    return Err(Error::InvalidDiscretization(format!("open boundary chain at node {node}")));
                };
                let (nodes, marker) = out.remove(0);
                if out.is_empty() {
                    next.remove(&node);
                }
                let (a, b) = (mesh.point(nodes[0]), mesh.point(nodes[1]));
                let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                for k in 0..per_edge {
                    let t0 = k as f64 / per_edge as f64;
                    let t1 = (k + 1) as f64 / per_edge as f64;
                    let mut el = BoundaryElement::new(at(t0), at(t1), marker);
                    el.origin = Some(EdgeOrigin { nodes, t0, t1 });
                    elements.push(el);
                }
                node = nodes[1];
                if node == start {
                    break;
                }
            }
        }
        BoundaryDiscretization::new(elements)
    }

    pub fn elements(&self) -> &[BoundaryElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn midpoints(&self) -> Vec<[f64; 2]> {
        self.elements.iter().map(|e| e.midpoint).collect()
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Particular solution `r^2/4 + r^3/9` of `lap u = 1 + r`.
fn u_hat(r: f64) -> f64 {
    r * r / 4.0 + r * r * r / 9.0
}

/// Normal derivative of [`u_hat`] at `x` for the center `c`.
fn q_hat(x: [f64; 2], c: [f64; 2], n: [f64; 2]) -> f64 {
    let r = dist(x, c);
    (0.5 + r / 3.0) * ((x[0] - c[0]) * n[0] + (x[1] - c[1]) * n[1])
}

fn rbf_matrix(centers: &[[f64; 2]]) -> DenseMatrix {
    DenseMatrix::from_fn(centers.len(), centers.len(), |i, j| 1.0 + dist(centers[i], centers[j]))
}

/// Coefficients `alpha` with `sum_j alpha_j (1 + |x_i - c_j|) = f(x_i)` at
/// every center.
pub fn rbf_expand(f: impl Fn(f64, f64) -> f64, centers: &[[f64; 2]]) -> Result<Vec<f64>> {
    let values: Vec<f64> = centers.iter().map(|c| f(c[0], c[1])).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            x: centers[i][0],
            y: centers[i][1],
        });
    }
    let lu = LuFactorization::new(&rbf_matrix(centers)).map_err(|_| Error::DegenerateCenters)?;
    lu.solve(&values)
}

/// Influence matrices for a boundary plus interior collocation points.
///
/// Points are numbered boundary midpoints first, then internal points.
#[derive(Debug, Clone)]
pub struct DrmSystem {
    boundary: BoundaryDiscretization,
    internal: Vec<[f64; 2]>,
    /// `N x N`; internal columns carry the free-term identity.
    pub h: DenseMatrix,
    /// `N x nb`
    pub g: DenseMatrix,
    /// RBF interpolation matrix `1 + r_ij`, `N x N`.
    pub f_rbf: DenseMatrix,
    f_lu: LuFactorization,
    /// `u_hat` of every center at every point, `N x N`.
    pub u_hat: DenseMatrix,
    /// `q_hat` of every center at every boundary midpoint, `nb x N`.
    pub q_hat: DenseMatrix,
}

/// Builds the collocation matrices. The diagonal of `H` is fixed by the
/// rigid-body condition, so every row sums to zero.
pub fn assemble_hg(boundary: &BoundaryDiscretization, internal: &[[f64; 2]]) -> Result<DrmSystem> {
    let nb = boundary.len();
    let n = nb + internal.len();
    let mut points = boundary.midpoints();
    points.extend_from_slice(internal);
    let mut seen = BTreeSet::new();
    for p in &points {
        if !seen.insert((p[0].to_bits(), p[1].to_bits())) {
            return Err(Error::InvalidDiscretization(format!(
                "coincident collocation points at ({}, {})",
                p[0], p[1]
            )));
        }
    }

    let mut h = DenseMatrix::zeros(n, n);
    let mut g = DenseMatrix::zeros(n, nb);
    for (i, &p) in points.iter().enumerate() {
        let mut row_sum = 0.0;
        for (j, el) in boundary.elements().iter().enumerate() {
            let (gij, hij) = el.integrals(p);
            g[(i, j)] = gij;
            if i != j {
                h[(i, j)] = hij;
                row_sum += hij;
            }
        }
        if i >= nb && (row_sum + 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDiscretization(format!(
                "internal point ({}, {}) is not inside the boundary",
                p[0], p[1]
            )));
        }
        h[(i, i)] = -row_sum;
    }

    let f_rbf = rbf_matrix(&points);
    let f_lu = LuFactorization::new(&f_rbf).map_err(|_| Error::DegenerateCenters)?;
    let u_hat_m = DenseMatrix::from_fn(n, n, |i, k| u_hat(dist(points[i], points[k])));
    let q_hat_m = DenseMatrix::from_fn(nb, n, |j, k| {
        let el = &boundary.elements()[j];
        q_hat(el.midpoint, points[k], el.normal)
    });
    Ok(DrmSystem {
        boundary: boundary.clone(),
        internal: internal.to_vec(),
        h,
        g,
        f_rbf,
        f_lu,
        u_hat: u_hat_m,
        q_hat: q_hat_m,
    })
}

/// Known data on one boundary element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementBc {
    /// Prescribed `u`.
    Value(f64),
    /// Prescribed `q = du/dn`.
    Flux(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrmSolution {
    /// `u` at boundary midpoints, then at internal points.
    pub u: Vec<f64>,
    /// `q` at boundary midpoints.
    pub q: Vec<f64>,
    /// RBF coefficients of the Laplacian.
    pub alpha: Vec<f64>,
}

impl DrmSolution {
    pub fn boundary_u(&self, nb: usize) -> &[f64] {
        &self.u[..nb]
    }

    pub fn internal_u(&self, nb: usize) -> &[f64] {
        &self.u[nb..]
    }
}

/// Dense LU of the collocation system for a fixed pattern of value/flux
/// elements, reusable for any data with that pattern.
#[derive(Debug, Clone)]
pub struct DrmLinearSolver {
    lu: LuFactorization,
    value_known: Vec<bool>,
    /// `D = (H U - G Q) F^{-1}`, needed only with a linear reaction term.
    d: Option<DenseMatrix>,
    c1: f64,
}

impl DrmSystem {
    pub fn boundary(&self) -> &BoundaryDiscretization {
        &self.boundary
    }

    pub fn internal(&self) -> &[[f64; 2]] {
        &self.internal
    }

    pub fn num_points(&self) -> usize {
        self.h.nrows()
    }

    /// All collocation points: boundary midpoints, then internal points.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut p = self.boundary.midpoints();
        p.extend_from_slice(&self.internal);
        p
    }

    /// RBF coefficients for Laplacian values `b` at every point.
    pub fn alpha(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.f_lu.solve(b)
    }

    /// `(H U - G Q) alpha`.
    pub fn particular_term(&self, alpha: &[f64]) -> Vec<f64> {
        let ua = self.u_hat.mul_vec(alpha);
        let qa = self.q_hat.mul_vec(alpha);
        let hu = self.h.mul_vec(&ua);
        let gq = self.g.mul_vec(&qa);
        hu.iter().zip(&gq).map(|(a, b)| a - b).collect()
    }

    fn d_matrix(&self) -> Result<DenseMatrix> {
        let n = self.num_points();
        let nb = self.boundary.len();
        let hu = self.h.mul(&self.u_hat);
        let gq = self.g.mul(&self.q_hat);
        let m = DenseMatrix::from_fn(n, n, |i, j| hu[(i, j)] - gq[(i, j)]);
        // D = M F^{-1}; F is symmetric, so D^T = F^{-1} M^T column by column.
        let mut d = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let row: Vec<f64> = (0..n).map(|j| m[(i, j)]).collect();
            let x = self.f_lu.solve(&row)?;
            for j in 0..n {
                d[(i, j)] = x[j];
            }
        }
        let _ = nb;
        Ok(d)
    }

    /// Factorizes the system for the given value/flux pattern. `c1` is the
    /// coefficient of a linear reaction term `c1 u` (zero for Poisson).
    pub fn linear_solver(&self, value_known: &[bool], c1: f64) -> Result<DrmLinearSolver> {
        let nb = self.boundary.len();
        if value_known.len() != nb {
            return Err(Error::DimensionMismatch {
                expected: nb,
                found: value_known.len(),
            });
        }
        if !value_known.iter().any(|&k| k) && c1 == 0.0 {
            return Err(Error::NonUnique);
        }
        let n = self.num_points();
        let d = if c1 != 0.0 { Some(self.d_matrix()?) } else { None };
        // Unknown per column: q_j where u_j is known, u_j otherwise; u at
        // internal points.
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            let du = d.as_ref().map_or(0.0, |d| c1 * d[(i, j)]);
            if j < nb && value_known[j] {
                -self.g[(i, j)]
            } else {
                self.h[(i, j)] - du
            }
        });
        let lu = LuFactorization::new(&a)?;
        Ok(DrmLinearSolver {
            lu,
            value_known: value_known.to_vec(),
            d,
            c1,
        })
    }

    /// Solves with the given element data and Laplacian-independent part
    /// `b0` of `lap u = b0 + c1 u` at every point.
    pub fn solve(&self, solver: &DrmLinearSolver, bcs: &[ElementBc], b0: &[f64]) -> Result<DrmSolution> {
        let nb = self.boundary.len();
        let n = self.num_points();
        if bcs.len() != nb || b0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: nb,
                found: bcs.len(),
            });
        }
        let alpha0 = self.alpha(b0)?;
        let mut rhs = self.particular_term(&alpha0);
        // Move known boundary data to the right-hand side.
        for (j, bc) in bcs.iter().enumerate() {
            match (*bc, solver.value_known[j]) {
                (ElementBc::Value(u), true) => {
                    for (i, r) in rhs.iter_mut().enumerate() {
                        let du = solver.d.as_ref().map_or(0.0, |d| solver.c1 * d[(i, j)]);
                        *r -= (self.h[(i, j)] - du) * u;
                    }
                }
                (ElementBc::Flux(q), false) => {
                    for (i, r) in rhs.iter_mut().enumerate() {
                        *r += self.g[(i, j)] * q;
                    }
                }
                _ => {
                    return Err(Error::Config(format!(
                        "element {j} data does not match the factorized pattern"
                    )))
                }
            }
        }
        let x = solver.lu.solve(&rhs)?;
        let mut u = alloc::vec![0.0; n];
        let mut q = alloc::vec![0.0; nb];
        for (j, bc) in bcs.iter().enumerate() {
            match *bc {
                ElementBc::Value(v) => {
                    u[j] = v;
                    q[j] = x[j];
                }
                ElementBc::Flux(f) => {
                    q[j] = f;
                    u[j] = x[j];
                }
            }
        }
        u[nb..].copy_from_slice(&x[nb..]);
        let b: Vec<f64> = b0.iter().zip(&u).map(|(b, u)| b + solver.c1 * u).collect();
        let alpha = self.alpha(&b)?;
        Ok(DrmSolution { u, q, alpha })
    }

    /// Evaluates the solution at an arbitrary interior point.
    pub fn evaluate(&self, sol: &DrmSolution, p: [f64; 2]) -> Result<f64> {
        let nb = self.boundary.len();
        let points = self.points();
        let mut value = 0.0;
        let mut correction = alloc::vec![0.0; points.len()];
        for (k, c) in points.iter().enumerate() {
            correction[k] = u_hat(dist(p, *c));
        }
        let ua = self.u_hat.mul_vec(&sol.alpha);
        let qa = self.q_hat.mul_vec(&sol.alpha);
        let mut solid = 0.0;
        for (j, el) in self.boundary.elements().iter().enumerate() {
            let (g, h) = el.integrals(p);
            value += g * sol.q[j] - h * sol.u[j];
            value -= g * qa[j] - h * ua[j];
            solid += h;
        }
        if (solid + 1.0).abs() > 1e-6 {
            return Err(Error::OutsideMesh { x: p[0], y: p[1] });
        }
        let _ = nb;
        value += correction.iter().zip(&sol.alpha).map(|(c, a)| c * a).sum::<f64>();
        Ok(value)
    }
}

fn check_operator(problem: &ProblemSpec) -> Result<f64> {
    if !matches!(problem.diffusion, Diffusion::Identity) && !problem.diffusion.is_identity() {
        return Err(Error::Unsupported("dual reciprocity needs an identity diffusion tensor".into()));
    }
    if problem.advection != [0.0, 0.0] {
        return Err(Error::Unsupported("dual reciprocity does not treat advection".into()));
    }
    match problem.reaction {
        Reaction::None => Ok(0.0),
        Reaction::Linear { c1, .. } => Ok(c1),
        Reaction::Power { .. } => Err(Error::Unsupported(
            "dual reciprocity handles only linear reaction terms".into(),
        )),
    }
}

/// `lap u - c1 u` at every point: `C(0) - f`.
fn laplacian_data(problem: &ProblemSpec, points: &[[f64; 2]]) -> Result<Vec<f64>> {
    let c0 = problem.reaction.value(0.0);
    points.iter().map(|p| Ok(c0 - problem.source_value(p[0], p[1])?)).collect()
}

/// Per-element data kind for `problem`; nonlinear elements start as values.
enum Data {
    Value(f64),
    Flux(f64),
    Nonlinear { law: PowerLaw, target: f64 },
}

fn element_data(
    problem: &ProblemSpec,
    boundary: &BoundaryDiscretization,
    overrides: &BTreeMap<usize, f64>,
) -> Result<Vec<Data>> {
    boundary
        .elements()
        .iter()
        .enumerate()
        .map(|(j, el)| {
            if let Some(&v) = overrides.get(&j) {
                return Ok(Data::Value(v));
            }
            let [x, y] = el.midpoint;
            Ok(match problem.condition(el.marker)? {
                BoundaryCondition::Dirichlet(d) => Data::Value(problem.dirichlet_value(d, x, y)?),
                BoundaryCondition::Neumann(d) => Data::Flux(problem.neumann_value(d, x, y, el.normal)?),
                BoundaryCondition::Nonlinear(nl) => Data::Nonlinear {
                    law: nl.law,
                    target: problem.nonlinear_target(nl, x, y)?,
                },
            })
        })
        .collect()
}

/// Reusable dual-reciprocity solver for one problem and discretization.
///
/// Elements listed in `overrides` take a prescribed value instead of their
/// marker's condition; this is how subdomain interface data enters.
#[derive(Debug, Clone)]
pub struct DrmProblem {
    system: DrmSystem,
    solver: DrmLinearSolver,
    b0: Vec<f64>,
    nonlinear: Vec<Option<(PowerLaw, f64)>>,
    fixed: Vec<ElementBc>,
}

/// Outcome of a dual-reciprocity solve, with the Newton trace of the
/// nonlinear boundary elements (a single entry when there are none).
#[derive(Debug, Clone, PartialEq)]
pub struct DrmOutcome {
    pub solution: DrmSolution,
    pub trace: Vec<NewtonState>,
    pub converged: bool,
}

impl DrmProblem {
    pub fn new(
        problem: &ProblemSpec,
        boundary: &BoundaryDiscretization,
        internal: &[[f64; 2]],
        interface_elements: &BTreeSet<usize>,
    ) -> Result<DrmProblem> {
        let c1 = check_operator(problem)?;
        let system = assemble_hg(boundary, internal)?;
        let placeholder: BTreeMap<usize, f64> = interface_elements.iter().map(|&j| (j, 0.0)).collect();
        let data = element_data(problem, boundary, &placeholder)?;
        let value_known: Vec<bool> = data.iter().map(|d| !matches!(d, Data::Flux(_))).collect();
        let solver = system.linear_solver(&value_known, c1)?;
        let b0 = laplacian_data(problem, &system.points())?;
        let mut nonlinear = Vec::with_capacity(data.len());
        let mut fixed = Vec::with_capacity(data.len());
        for d in data {
            match d {
                Data::Value(v) => {
                    nonlinear.push(None);
                    fixed.push(ElementBc::Value(v));
                }
                Data::Flux(q) => {
                    nonlinear.push(None);
                    fixed.push(ElementBc::Flux(q));
                }
                Data::Nonlinear { law, target } => {
                    nonlinear.push(Some((law, target)));
                    fixed.push(ElementBc::Value(1.0));
                }
            }
        }
        Ok(DrmProblem {
            system,
            solver,
            b0,
            nonlinear,
            fixed,
        })
    }

    pub fn system(&self) -> &DrmSystem {
        &self.system
    }

    pub fn has_nonlinear_boundary(&self) -> bool {
        self.nonlinear.iter().any(Option::is_some)
    }

    /// Solves with `interface` values on the interface elements (indexed by
    /// boundary element). Nonlinear elements are resolved by Newton's method
    /// on the element trace values starting from `u = 1`; each step reuses
    /// the factorized system.
    pub fn solve(
        &self,
        interface: &BTreeMap<usize, f64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<DrmOutcome> {
        let mut bcs = self.fixed.clone();
        for (&j, &v) in interface {
            if j >= bcs.len() {
                return Err(Error::DimensionMismatch {
                    expected: bcs.len(),
                    found: j + 1,
                });
            }
            bcs[j] = ElementBc::Value(v);
        }
        let residual = |bcs: &[ElementBc]| -> f64 {
            let mut s = 0.0;
            for (j, nl) in self.nonlinear.iter().enumerate() {
                if let (Some((law, target)), ElementBc::Value(u)) = (nl, bcs[j]) {
                    s += (law.value(u) - target).powi(2);
                }
            }
            s.sqrt()
        };
        let mut trace = alloc::vec![NewtonState {
            iteration: 0,
            residual_norm: residual(&bcs),
            step_norm: None,
            inner_iterations: 0,
        }];
        let mut converged = trace[0].residual_norm <= tol;
        let mut iteration = 0;
        while !converged && iteration < max_iter {
            iteration += 1;
            let mut step2 = 0.0;
            for (j, nl) in self.nonlinear.iter().enumerate() {
                if let (Some((law, target)), ElementBc::Value(u)) = (nl, bcs[j]) {
                    let d = law.derivative(u);
                    if d == 0.0 || !d.is_finite() {
                        return Err(Error::Newton {
                            iteration,
                            source: alloc::boxed::Box::new(Error::SingularDiagonal { row: j }),
                        });
                    }
                    let du = -(law.value(u) - target) / d;
                    step2 += du * du;
                    bcs[j] = ElementBc::Value(u + du);
                }
            }
            let rn = residual(&bcs);
            trace.push(NewtonState {
                iteration,
                residual_norm: rn,
                step_norm: Some(step2.sqrt()),
                inner_iterations: 1,
            });
            converged = rn <= tol;
        }
        let solution = self.system.solve(&self.solver, &bcs, &self.b0)?;
        Ok(DrmOutcome {
            solution,
            trace,
            converged,
        })
    }
}

/// Dual-reciprocity solve of `problem` (Dirichlet and Neumann data only).
pub fn drm_solve(
    problem: &ProblemSpec,
    boundary: &BoundaryDiscretization,
    internal: &[[f64; 2]],
) -> Result<DrmSolution> {
    let p = DrmProblem::new(problem, boundary, internal, &BTreeSet::new())?;
    if p.has_nonlinear_boundary() {
        return Err(Error::Unsupported(
            "nonlinear boundary data needs drm_solve_nonlinear".into(),
        ));
    }
    Ok(p.solve(&BTreeMap::new(), 1.0, 0)?.solution)
}

/// Dual-reciprocity solve with Newton iteration for nonlinear boundary data.
pub fn drm_solve_nonlinear(
    problem: &ProblemSpec,
    boundary: &BoundaryDiscretization,
    internal: &[[f64; 2]],
    tol: f64,
    max_iter: usize,
) -> Result<DrmOutcome> {
    DrmProblem::new(problem, boundary, internal, &BTreeSet::new())?.solve(&BTreeMap::new(), tol, max_iter)
}

/// `n x n` tensor grid of points strictly inside a rectangle.
pub fn interior_grid(corners: [f64; 4], n: usize) -> Vec<[f64; 2]> {
    let [x0, y0, x1, y1] = corners;
    let mut out = Vec::with_capacity(n * n);
    for j in 1..=n {
        for i in 1..=n {
            out.push([
                x0 + (x1 - x0) * i as f64 / (n + 1) as f64,
                y0 + (y1 - y0) * j as f64 / (n + 1) as f64,
            ]);
        }
    }
    out
}
