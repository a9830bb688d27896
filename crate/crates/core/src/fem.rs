//! Linear triangular finite elements: element blocks, boundary conditions,
//! global assembly, and the discrete residual/Jacobian consumed by Newton.
//!
//! The discrete operator on a free node `i` is
//!
//! ```text
//! R_i(u) = sum_K int_K (A(u_h) grad u_h . grad N_i + (b . grad u_h) N_i + C(u_h) N_i)
//!          - int f N_i - int_{Gamma_N} g N_i
//! ```
//!
//! i.e. the weak form of `-div(A grad u) + b . grad u + C(u) = f` written as
//! `L_h(u) - f`. Constrained nodes carry `u_i - g_i` (Dirichlet) or
//! `B(u_i) - h_i` (nonlinear trace condition) instead.

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::linalg::{conjugate_gradient, h1_norm, norm2, SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryEdge, Mesh};
use crate::newton::NonlinearProblem;
use crate::problem::{is_spd, BoundaryCondition, Diffusion, PowerLaw, ProblemSpec, Reaction};
use crate::quadrature::QuadratureRule;
use crate::{Error, Result};

/// Barycentric P1 basis of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFunctions {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// Constant gradients of `N_0, N_1, N_2`.
    pub gradients: [[f64; 2]; 3],
}

impl ShapeFunctions {
    pub fn new(mesh: &Mesh, element: usize) -> Result<ShapeFunctions> {
        mesh.element(element)?;
        Ok(ShapeFunctions {
            vertices: mesh.vertices(element),
            area: mesh.area(element),
            gradients: mesh.shape_gradients(element),
        })
    }

    pub fn values(&self, x: f64, y: f64) -> [f64; 3] {
        let [p0, p1, p2] = self.vertices;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let l1 = ((x - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (y - p0[1])) / det;
        let l2 = ((p1[0] - p0[0]) * (y - p0[1]) - (x - p0[0]) * (p1[1] - p0[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Gradient of the interpolant with nodal values `u`.
    pub fn interpolant_gradient(&self, u: [f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (ui, gi) in u.iter().zip(&self.gradients) {
            g[0] += ui * gi[0];
            g[1] += ui * gi[1];
        }
        g
    }
}

fn mat_vec(a: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn local_values(mesh: &Mesh, element: usize, u: &[f64]) -> [f64; 3] {
    let n = mesh.elements()[element].nodes;
    [u[n[0]], u[n[1]], u[n[2]]]
}

fn check_len(mesh: &Mesh, u: &[f64]) -> Result<()> {
    if u.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_nodes(),
            found: u.len(),
        });
    }
    Ok(())
}

/// Diffusion and advection block `int A grad N_j . grad N_i + (b . grad N_j) N_i`
/// with `A` frozen at the iterate `u_current`.
///
/// `u_current` may be empty when `diffusion` does not depend on `u`.
pub fn element_stiffness(
    mesh: &Mesh,
    element: usize,
    diffusion: &Diffusion,
    advection: [f64; 2],
    u_current: &[f64],
    rule: &QuadratureRule,
) -> Result<[[f64; 3]; 3]> {
    let sf = ShapeFunctions::new(mesh, element)?;
    let local = if diffusion.depends_on_u() {
        check_len(mesh, u_current)?;
        local_values(mesh, element, u_current)
    } else {
        [0.0; 3]
    };
    let mut k = [[0.0; 3]; 3];
    for ([x, y], l, w) in rule.element_points(mesh, element)? {
        let uq = l[0] * local[0] + l[1] * local[1] + l[2] * local[2];
        let a = diffusion.tensor(uq);
        if !is_spd(a) {
            return Err(Error::Coefficient { element, x, y });
        }
        for i in 0..3 {
            for j in 0..3 {
                let diff = dot2(mat_vec(a, sf.gradients[j]), sf.gradients[i]);
                let adv = dot2(advection, sf.gradients[j]) * l[i];
                k[i][j] += w * (diff + adv);
            }
        }
    }
    Ok(k)
}

/// `int_K f N_i`.
pub fn element_force(
    mesh: &Mesh,
    element: usize,
    f: impl Fn(f64, f64) -> f64,
    rule: &QuadratureRule,
) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for ([x, y], l, w) in rule.element_points(mesh, element)? {
        let v = f(x, y);
        if !v.is_finite() {
            return Err(Error::NonFinite { x, y });
        }
        for i in 0..3 {
            out[i] += w * v * l[i];
        }
    }
    Ok(out)
}

fn fallible_force(
    mesh: &Mesh,
    element: usize,
    f: impl Fn(f64, f64) -> Result<f64>,
    rule: &QuadratureRule,
) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for ([x, y], l, w) in rule.element_points(mesh, element)? {
        let v = f(x, y)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { x, y });
        }
        for i in 0..3 {
            out[i] += w * v * l[i];
        }
    }
    Ok(out)
}

/// Unit outward normal of a boundary edge (the owning element is on the left).
pub fn outward_normal(mesh: &Mesh, edge: &BoundaryEdge) -> [f64; 2] {
    let a = mesh.point(edge.nodes[0]);
    let b = mesh.point(edge.nodes[1]);
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    [dy / len, -dx / len]
}

fn edge_load(
    mesh: &Mesh,
    edge: &BoundaryEdge,
    g: impl Fn(f64, f64) -> Result<f64>,
    rule: &QuadratureRule,
) -> Result<[f64; 2]> {
    let a = mesh.point(edge.nodes[0]);
    let b = mesh.point(edge.nodes[1]);
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let mut out = [0.0; 2];
    for ([x, y], s, w) in rule.segment_points(a, b)? {
        let v = g(x, y)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { x, y });
        }
        let t = s / len;
        out[0] += w * v * (1.0 - t);
        out[1] += w * v * t;
    }
    Ok(out)
}

/// Global matrix, load vector and the Dirichlet values already eliminated.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    pub k: SparseMatrix,
    pub f: Vec<f64>,
    pub dirichlet: BTreeMap<usize, f64>,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// Dense LU solve; intended for small systems and as a test oracle.
    pub fn solve_direct(&self) -> Result<Vec<f64>> {
        crate::linalg::dense_solve(&self.k.to_dense(), &self.f)
    }

    /// Conjugate gradients; valid for symmetric positive definite `K`.
    pub fn solve_cg(&self, tol: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut x0 = alloc::vec![0.0; n];
        for (&i, &v) in &self.dirichlet {
            x0[i] = v;
        }
        let (x, stats) = conjugate_gradient(&self.k, &self.f, &x0, tol, 20 * n + 100)?;
        if !stats.converged {
            return Err(Error::Breakdown {
                solver: "cg",
                iteration: stats.iterations,
            });
        }
        Ok(x)
    }
}

/// Adds `int_edge g N_i` to the load entries of the edge's two nodes.
pub fn apply_neumann(
    mut system: AssembledSystem,
    mesh: &Mesh,
    edge: &BoundaryEdge,
    g: impl Fn(f64, f64) -> f64,
    rule: &QuadratureRule,
) -> Result<AssembledSystem> {
    if system.dim() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_nodes(),
            found: system.dim(),
        });
    }
    let load = edge_load(mesh, edge, |x, y| Ok(g(x, y)), rule)?;
    system.f[edge.nodes[0]] += load[0];
    system.f[edge.nodes[1]] += load[1];
    Ok(system)
}

/// Symmetric elimination of `u_i = value` constraints.
///
/// Constrained rows and columns are zeroed with a unit diagonal, and the
/// eliminated column contributions move to the right-hand side so the free
/// equations are unchanged.
pub fn apply_dirichlet(system: AssembledSystem, constraints: &[(usize, f64)]) -> Result<AssembledSystem> {
    let n = system.dim();
    let mut values = system.dirichlet.clone();
    let mut fresh = BTreeMap::new();
    for &(node, v) in constraints {
        if node >= n {
            return Err(Error::DimensionMismatch { expected: n, found: node + 1 });
        }
        if let Some(&old) = values.get(&node) {
            if old != v {
                return Err(Error::ConstraintConflict { node });
            }
            continue;
        }
        values.insert(node, v);
        fresh.insert(node, v);
    }
    if fresh.is_empty() {
        return Ok(AssembledSystem { dirichlet: values, ..system });
    }

    let mut f = system.f;
    let mut builder = TripletBuilder::with_capacity(n, n, system.k.nnz());
    for (i, j, v) in system.k.iter() {
        match (fresh.contains_key(&i), fresh.get(&j)) {
            (false, None) => builder.push(i, j, v),
            (false, Some(g)) => f[i] -= v * g,
            (true, _) => {}
        }
    }
    for (&node, &v) in &fresh {
        builder.push(node, node, 1.0);
        f[node] = v;
    }
    Ok(AssembledSystem {
        k: builder.build(),
        f,
        dirichlet: values,
    })
}

/// How a boundary node is constrained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeConstraint {
    Dirichlet(f64),
    /// `law(u_i) = target`.
    Nonlinear { law: PowerLaw, target: f64 },
}

impl NodeConstraint {
    /// Value the constraint pins the node to. For a nonlinear condition this
    /// is the real root of `law(u) = target`, when one exists.
    pub fn resolved_value(&self) -> Option<f64> {
        match *self {
            NodeConstraint::Dirichlet(v) => Some(v),
            NodeConstraint::Nonlinear { law, target } => {
                let ratio = target / law.coefficient;
                if ratio > 0.0 {
                    Some(ratio.powf(1.0 / law.exponent))
                } else if ratio == 0.0 && law.exponent > 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }
}

/// Resolves per-node constraints from the boundary markers of `mesh`.
///
/// Dirichlet data wins over nonlinear data at shared corner nodes; among
/// equal kinds the lower marker wins. `overrides` pins nodes to given values
/// regardless of their marker, and is required for edges whose marker has no
/// condition in `spec` (subdomain interfaces).
pub fn boundary_constraints(
    mesh: &Mesh,
    spec: &ProblemSpec,
    overrides: &BTreeMap<usize, f64>,
) -> Result<BTreeMap<usize, NodeConstraint>> {
    let mut out: BTreeMap<usize, NodeConstraint> = BTreeMap::new();
    for (&node, &v) in overrides {
        if node >= mesh.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_nodes(),
                found: node + 1,
            });
        }
        out.insert(node, NodeConstraint::Dirichlet(v));
    }
    let mut edges: Vec<&BoundaryEdge> = mesh.boundary_edges().iter().collect();
    edges.sort_by_key(|e| e.marker);
    for edge in edges {
        let bc = match spec.boundary.get(&edge.marker) {
            Some(bc) => bc,
            None => {
                if edge.nodes.iter().all(|n| overrides.contains_key(n)) {
                    continue;
                }
                return Err(Error::Config(format!(
                    "boundary edge {:?} has marker {} with no condition and no interface data",
                    edge.nodes, edge.marker
                )));
            }
        };
        for &node in &edge.nodes {
            if overrides.contains_key(&node) {
                continue;
            }
            let [x, y] = mesh.point(node);
            match bc {
                BoundaryCondition::Dirichlet(data) => {
                    if !matches!(out.get(&node), Some(NodeConstraint::Dirichlet(_))) {
                        out.insert(node, NodeConstraint::Dirichlet(spec.dirichlet_value(data, x, y)?));
                    }
                }
                BoundaryCondition::Nonlinear(nl) => {
                    if !out.contains_key(&node) {
                        out.insert(
                            node,
                            NodeConstraint::Nonlinear {
                                law: nl.law,
                                target: spec.nonlinear_target(nl, x, y)?,
                            },
                        );
                    }
                }
                BoundaryCondition::Neumann(_) => {}
            }
        }
    }
    Ok(out)
}

fn neumann_vector(mesh: &Mesh, spec: &ProblemSpec, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let mut load = alloc::vec![0.0; mesh.num_nodes()];
    for edge in mesh.boundary_edges() {
        if let Some(BoundaryCondition::Neumann(data)) = spec.boundary.get(&edge.marker) {
            let n = outward_normal(mesh, edge);
            let l = edge_load(mesh, edge, |x, y| spec.neumann_value(data, x, y, n), rule)?;
            load[edge.nodes[0]] += l[0];
            load[edge.nodes[1]] += l[1];
        }
    }
    Ok(load)
}

fn source_vector(mesh: &Mesh, spec: &ProblemSpec, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let mut load = alloc::vec![0.0; mesh.num_nodes()];
    for e in mesh.elements() {
        let fe = fallible_force(mesh, e.id, |x, y| spec.source_value(x, y), rule)?;
        for (k, &node) in e.nodes.iter().enumerate() {
            load[node] += fe[k];
        }
    }
    Ok(load)
}

fn stiffness_matrix(
    mesh: &Mesh,
    diffusion: &Diffusion,
    advection: [f64; 2],
    u: &[f64],
    rule: &QuadratureRule,
) -> Result<SparseMatrix> {
    let n = mesh.num_nodes();
    let mut b = TripletBuilder::with_capacity(n, n, 9 * mesh.num_elements());
    for e in mesh.elements() {
        let ke = element_stiffness(mesh, e.id, diffusion, advection, u, rule)?;
        for i in 0..3 {
            for j in 0..3 {
                b.push(e.nodes[i], e.nodes[j], ke[i][j]);
            }
        }
    }
    Ok(b.build())
}

/// `int C(u_h) N_i` with its derivative block when `with_jacobian` is set.
fn reaction_terms(
    mesh: &Mesh,
    reaction: &Reaction,
    u: &[f64],
    rule: &QuadratureRule,
    jac: Option<&mut TripletBuilder>,
) -> Result<Vec<f64>> {
    let mut out = alloc::vec![0.0; mesh.num_nodes()];
    if matches!(reaction, Reaction::None) {
        return Ok(out);
    }
    let mut jac = jac;
    for e in mesh.elements() {
        let local = local_values(mesh, e.id, u);
        let mut block = [[0.0; 3]; 3];
        for ([x, y], l, w) in rule.element_points(mesh, e.id)? {
            let uq = l[0] * local[0] + l[1] * local[1] + l[2] * local[2];
            let c = reaction.value(uq);
            if !c.is_finite() {
                return Err(Error::NonFinite { x, y });
            }
            let dc = reaction.derivative(uq);
            for i in 0..3 {
                out[e.nodes[i]] += w * c * l[i];
                for j in 0..3 {
                    block[i][j] += w * dc * l[i] * l[j];
                }
            }
        }
        if let Some(b) = jac.as_deref_mut() {
            for i in 0..3 {
                for j in 0..3 {
                    b.push(e.nodes[i], e.nodes[j], block[i][j]);
                }
            }
        }
    }
    Ok(out)
}

/// Assembles `K(u_current)` and `F` for `spec`, applies Neumann loads, and
/// eliminates all boundary constraints.
///
/// Nonlinear trace conditions are linearized at `u_current`; if the law has
/// a vanishing derivative there the node is pinned to the law's root.
pub fn assemble(mesh: &Mesh, spec: &ProblemSpec, u_current: &[f64]) -> Result<AssembledSystem> {
    check_len(mesh, u_current)?;
    let rule = QuadratureRule::default_triangle();
    let edge_rule = QuadratureRule::default_segment();
    let k = stiffness_matrix(mesh, &spec.diffusion, spec.advection, u_current, &rule)?;
    let mut f = source_vector(mesh, spec, &rule)?;
    let reaction = reaction_terms(mesh, &spec.reaction, u_current, &rule, None)?;
    let neumann = neumann_vector(mesh, spec, &edge_rule)?;
    for i in 0..f.len() {
        f[i] += neumann[i] - reaction[i];
    }
    let system = AssembledSystem {
        k,
        f,
        dirichlet: BTreeMap::new(),
    };
    let constraints = boundary_constraints(mesh, spec, &BTreeMap::new())?;
    let mut pinned = Vec::with_capacity(constraints.len());
    for (&node, c) in &constraints {
        let value = match *c {
            NodeConstraint::Dirichlet(v) => v,
            NodeConstraint::Nonlinear { law, target } => {
                let u = u_current[node];
                let d = law.derivative(u);
                let step = (law.value(u) - target) / d;
                if d != 0.0 && step.is_finite() {
                    u - step
                } else {
                    c.resolved_value().ok_or_else(|| {
                        Error::Config(format!("no real root of the trace condition at node {node}"))
                    })?
                }
            }
        };
        pinned.push((node, value));
    }
    apply_dirichlet(system, &pinned)
}

/// Discrete nonlinear problem on a mesh, with optional interface overrides.
#[derive(Debug, Clone)]
pub struct FemProblem<'a> {
    mesh: &'a Mesh,
    spec: &'a ProblemSpec,
    rule: QuadratureRule,
    constraints: BTreeMap<usize, NodeConstraint>,
    /// Source plus Neumann load; independent of `u`.
    load: Vec<f64>,
    /// `K` when the interior operator is linear.
    linear_k: Option<SparseMatrix>,
}

impl<'a> FemProblem<'a> {
    pub fn new(mesh: &'a Mesh, spec: &'a ProblemSpec) -> Result<Self> {
        Self::with_overrides(mesh, spec, &BTreeMap::new())
    }

    /// Like [`FemProblem::new`] with extra Dirichlet values pinned at the
    /// given nodes.
    pub fn with_overrides(mesh: &'a Mesh, spec: &'a ProblemSpec, overrides: &BTreeMap<usize, f64>) -> Result<Self> {
        let rule = QuadratureRule::default_triangle();
        let constraints = boundary_constraints(mesh, spec, overrides)?;
        let mut load = source_vector(mesh, spec, &rule)?;
        let neumann = neumann_vector(mesh, spec, &QuadratureRule::default_segment())?;
        for (l, n) in load.iter_mut().zip(&neumann) {
            *l += n;
        }
        let linear_k = if spec.diffusion.depends_on_u() {
            None
        } else {
            Some(stiffness_matrix(mesh, &spec.diffusion, spec.advection, &[], &rule)?)
        };
        Ok(FemProblem {
            mesh,
            spec,
            rule,
            constraints,
            load,
            linear_k,
        })
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.mesh
    }

    pub fn spec(&self) -> &'a ProblemSpec {
        self.spec
    }

    pub fn constraints(&self) -> &BTreeMap<usize, NodeConstraint> {
        &self.constraints
    }

    /// Zero interior, Dirichlet values imposed, nonlinear trace nodes at 1.
    pub fn initial_guess(&self) -> Vec<f64> {
        let mut u = alloc::vec![0.0; self.mesh.num_nodes()];
        for (&node, c) in &self.constraints {
            u[node] = match *c {
                NodeConstraint::Dirichlet(v) => v,
                NodeConstraint::Nonlinear { .. } => 1.0,
            };
        }
        u
    }

    /// Linear system with every constraint pinned to its resolved value.
    ///
    /// Valid only for a linear interior operator; the result is symmetric
    /// positive definite when there is no advection.
    pub fn linear_system(&self) -> Result<AssembledSystem> {
        if !self.spec.is_linear_interior() {
            return Err(Error::Unsupported("linear system of a nonlinear interior operator".into()));
        }
        let k = self.linear_k.clone().expect("linear interior has a cached matrix");
        let system = AssembledSystem {
            k,
            f: self.load.clone(),
            dirichlet: BTreeMap::new(),
        };
        let mut pinned = Vec::with_capacity(self.constraints.len());
        for (&node, c) in &self.constraints {
            let v = c
                .resolved_value()
                .ok_or_else(|| Error::Config(format!("no real root of the trace condition at node {node}")))?;
            pinned.push((node, v));
        }
        apply_dirichlet(system, &pinned)
    }

    fn operator(&self, u: &[f64], jac: Option<&mut TripletBuilder>) -> Result<Vec<f64>> {
        check_len(self.mesh, u)?;
        let mut jac = jac;
        let mut r = match &self.linear_k {
            Some(k) => {
                if let Some(b) = jac.as_deref_mut() {
                    for (i, j, v) in k.iter() {
                        b.push(i, j, v);
                    }
                }
                k.mul_vec(u)
            }
            None => self.nonlinear_diffusion(u, jac.as_deref_mut())?,
        };
        let c = reaction_terms(self.mesh, &self.spec.reaction, u, &self.rule, jac)?;
        for i in 0..r.len() {
            r[i] += c[i] - self.load[i];
        }
        Ok(r)
    }

    fn nonlinear_diffusion(&self, u: &[f64], jac: Option<&mut TripletBuilder>) -> Result<Vec<f64>> {
        let diffusion = &self.spec.diffusion;
        let b = self.spec.advection;
        let mut out = alloc::vec![0.0; u.len()];
        let mut jac = jac;
        for e in self.mesh.elements() {
            let sf = ShapeFunctions::new(self.mesh, e.id)?;
            let local = local_values(self.mesh, e.id, u);
            let grad = sf.interpolant_gradient(local);
            let mut block = [[0.0; 3]; 3];
            for ([x, y], l, w) in self.rule.element_points(self.mesh, e.id)? {
                let uq = l[0] * local[0] + l[1] * local[1] + l[2] * local[2];
                let a = diffusion.tensor(uq);
                if !is_spd(a) {
                    return Err(Error::Coefficient { element: e.id, x, y });
                }
                let flux = mat_vec(a, grad);
                let dflux = mat_vec(diffusion.derivative(uq), grad);
                let adv = dot2(b, grad);
                for i in 0..3 {
                    out[e.nodes[i]] += w * (dot2(flux, sf.gradients[i]) + adv * l[i]);
                    for j in 0..3 {
                        block[i][j] += w
                            * (dot2(mat_vec(a, sf.gradients[j]), sf.gradients[i])
                                + dot2(b, sf.gradients[j]) * l[i]
                                + l[j] * dot2(dflux, sf.gradients[i]));
                    }
                }
            }
            if let Some(bld) = jac.as_deref_mut() {
                for i in 0..3 {
                    for j in 0..3 {
                        bld.push(e.nodes[i], e.nodes[j], block[i][j]);
                    }
                }
            }
        }
        Ok(out)
    }
}

impl NonlinearProblem for FemProblem<'_> {
    fn dim(&self) -> usize {
        self.mesh.num_nodes()
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.operator(u, None)?;
        for (&node, c) in &self.constraints {
            r[node] = match *c {
                NodeConstraint::Dirichlet(v) => u[node] - v,
                NodeConstraint::Nonlinear { law, target } => law.value(u[node]) - target,
            };
        }
        if let Some(i) = r.iter().position(|v| !v.is_finite()) {
            let [x, y] = self.mesh.point(i);
            return Err(Error::NonFinite { x, y });
        }
        Ok(r)
    }

    fn jacobian(&self, u: &[f64]) -> Result<SparseMatrix> {
        let n = self.dim();
        let mut full = TripletBuilder::with_capacity(n, n, 18 * self.mesh.num_elements());
        self.operator(u, Some(&mut full))?;
        let full = full.build();
        let mut b = TripletBuilder::with_capacity(n, n, full.nnz());
        for (i, j, v) in full.iter() {
            if !self.constraints.contains_key(&i) {
                b.push(i, j, v);
            }
        }
        for (&node, c) in &self.constraints {
            let d = match *c {
                NodeConstraint::Dirichlet(_) => 1.0,
                NodeConstraint::Nonlinear { law, .. } => law.derivative(u[node]),
            };
            b.push(node, node, d);
        }
        Ok(b.build())
    }

    fn step_norm(&self, du: &[f64]) -> f64 {
        h1_norm(self.mesh, du).unwrap_or_else(|_| norm2(du))
    }
}

/// Solves a problem with linear interior and pinned constraints by
/// conjugate gradients (or dense LU when advection makes `K` nonsymmetric).
pub fn solve_linear(mesh: &Mesh, spec: &ProblemSpec) -> Result<Vec<f64>> {
    let problem = FemProblem::new(mesh, spec)?;
    let system = problem.linear_system()?;
    if spec.advection == [0.0, 0.0] {
        system.solve_cg(1e-12)
    } else {
        system.solve_direct()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::linalg::{dense_solve, l2_norm};
    use crate::mesh::build_rect_mesh;
    use crate::problem::{BcData, Domain, Source};

    fn right_triangle() -> Mesh {
        use crate::mesh::{Element, Node};
        let nodes = alloc::vec![
            Node { id: 0, x: 0.0, y: 0.0 },
            Node { id: 1, x: 1.0, y: 0.0 },
            Node { id: 2, x: 0.0, y: 1.0 },
        ];
        let elements = alloc::vec![Element {
            id: 0,
            nodes: [0, 1, 2],
            generation: 0,
            parent: None,
        }];
        let edges = alloc::vec![
            BoundaryEdge { nodes: [0, 1], element: 0, marker: 0 },
            BoundaryEdge { nodes: [1, 2], element: 0, marker: 1 },
            BoundaryEdge { nodes: [2, 0], element: 0, marker: 2 },
        ];
        Mesh::from_parts(nodes, elements, edges, 0).unwrap()
    }

    fn rule() -> QuadratureRule {
        QuadratureRule::default_triangle()
    }

    #[test]
    fn shape_functions_partition_unity() {
        let mesh = build_rect_mesh(2, 3, [0.0, 0.0, 2.0, 1.0]).unwrap();
        for e in mesh.elements() {
            let sf = ShapeFunctions::new(&mesh, e.id).unwrap();
            for (k, &node) in e.nodes.iter().enumerate() {
                let [x, y] = mesh.point(node);
                let v = sf.values(x, y);
                for (m, vm) in v.iter().enumerate() {
                    let expect = if m == k { 1.0 } else { 0.0 };
                    assert!((vm - expect).abs() < 1e-14);
                }
            }
            let c = mesh.centroid(e.id);
            assert!((sf.values(c[0], c[1]).iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stiffness_of_unit_right_triangle() {
        let mesh = right_triangle();
        let k = element_stiffness(&mesh, 0, &Diffusion::Identity, [0.0, 0.0], &[], &rule()).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expect[i][j]).abs() < 1e-14, "{k:?}");
            }
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_scale_invariant() {
        let a = Diffusion::Tensor([[2.0, 0.3], [0.3, 1.0]]);
        let small = build_rect_mesh(3, 2, [0.0, 0.0, 1.0, 1.0]).unwrap();
        let big = build_rect_mesh(3, 2, [0.0, 0.0, 7.0, 7.0]).unwrap();
        for e in small.elements() {
            let ks = element_stiffness(&small, e.id, &a, [0.0, 0.0], &[], &rule()).unwrap();
            let kb = element_stiffness(&big, e.id, &a, [0.0, 0.0], &[], &rule()).unwrap();
            for i in 0..3 {
                assert!(ks[i].iter().sum::<f64>().abs() < 1e-13);
                for j in 0..3 {
                    assert!((ks[i][j] - kb[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_spd_coefficient_is_rejected() {
        let mesh = right_triangle();
        let bad = Diffusion::Tensor([[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(
            element_stiffness(&mesh, 0, &bad, [0.0, 0.0], &[], &rule()),
            Err(Error::Coefficient { element: 0, .. })
        ));
    }

    #[test]
    fn force_vectors() {
        let mesh = right_triangle();
        let ones = element_force(&mesh, 0, |_, _| 1.0, &rule()).unwrap();
        assert!(ones.iter().all(|v| (v - 0.5 / 3.0).abs() < 1e-15));
        assert_eq!(element_force(&mesh, 0, |_, _| 0.0, &rule()).unwrap(), [0.0; 3]);
        let fx = element_force(&mesh, 0, |x, _| x, &rule()).unwrap();
        let expect = [1.0 / 24.0, 1.0 / 12.0, 1.0 / 24.0];
        for i in 0..3 {
            assert!((fx[i] - expect[i]).abs() < 1e-15);
        }
        assert!(matches!(
            element_force(&mesh, 0, |_, _| f64::NAN, &rule()),
            Err(Error::NonFinite { .. })
        ));
    }

    fn empty_system(n: usize) -> AssembledSystem {
        AssembledSystem {
            k: SparseMatrix::identity(n),
            f: alloc::vec![0.0; n],
            dirichlet: BTreeMap::new(),
        }
    }

    #[test]
    fn neumann_loads() {
        let mesh = build_rect_mesh(1, 1, [0.0, 0.0, 2.0, 1.0]).unwrap();
        let seg = QuadratureRule::default_segment();
        let edge = mesh.boundary_edges()[0];
        let a = mesh.point(edge.nodes[0]);
        let len = {
            let b = mesh.point(edge.nodes[1]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        };
        let s0 = apply_neumann(empty_system(4), &mesh, &edge, |_, _| 0.0, &seg).unwrap();
        assert_eq!(s0.f, alloc::vec![0.0; 4]);
        let s1 = apply_neumann(empty_system(4), &mesh, &edge, |_, _| 1.0, &seg).unwrap();
        assert!((s1.f[edge.nodes[0]] - len / 2.0).abs() < 1e-14);
        assert!((s1.f[edge.nodes[1]] - len / 2.0).abs() < 1e-14);
        // g = arc length from the first node; analytic integrals L^2/6, L^2/3.
        let arc = |x: f64, y: f64| (x - a[0]).hypot(y - a[1]);
        let s2 = apply_neumann(empty_system(4), &mesh, &edge, arc, &seg).unwrap();
        assert!((s2.f[edge.nodes[0]] - len * len / 6.0).abs() < 1e-14);
        assert!((s2.f[edge.nodes[1]] - len * len / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_elimination() {
        let mesh = build_rect_mesh(3, 3, [0.0, 0.0, 1.0, 1.0]).unwrap();
        let k = stiffness_matrix(&mesh, &Diffusion::Identity, [0.0, 0.0], &[], &rule()).unwrap();
        let n = mesh.num_nodes();
        let base = AssembledSystem { k, f: alloc::vec![0.0; n], dirichlet: BTreeMap::new() };

        assert_eq!(apply_dirichlet(base.clone(), &[]).unwrap(), base);

        let all: Vec<(usize, f64)> = (0..n).map(|i| (i, 2.5)).collect();
        let s = apply_dirichlet(base.clone(), &all).unwrap();
        assert!(s.solve_direct().unwrap().iter().all(|v| (v - 2.5).abs() < 1e-14));

        let bc: Vec<(usize, f64)> = mesh.boundary_nodes().into_iter().map(|i| (i, mesh.point(i)[0])).collect();
        let s = apply_dirichlet(base.clone(), &bc).unwrap();
        assert!(s.k.is_symmetric(0.0));
        let u = dense_solve(&s.k.to_dense(), &s.f).unwrap();
        for node in mesh.nodes() {
            assert!((u[node.id] - node.x).abs() < 1e-10);
        }

        assert_eq!(
            apply_dirichlet(base.clone(), &[(1, 1.0), (1, 2.0)]).unwrap_err(),
            Error::ConstraintConflict { node: 1 }
        );
        assert!(apply_dirichlet(base, &[(1, 1.0), (1, 1.0)]).is_ok());
    }

    #[test]
    fn two_element_assembly_matches_hand_sum() {
        let mesh = build_rect_mesh(1, 1, [0.0, 0.0, 1.0, 1.0]).unwrap();
        let k = stiffness_matrix(&mesh, &Diffusion::Identity, [0.0, 0.0], &[], &rule()).unwrap();
        let mut hand = [[0.0; 4]; 4];
        for e in mesh.elements() {
            let ke = element_stiffness(&mesh, e.id, &Diffusion::Identity, [0.0, 0.0], &[], &rule()).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    hand[e.nodes[i]][e.nodes[j]] += ke[i][j];
                }
            }
        }
        // Nodes (0,0), (1,0), (0,1), (1,1); the diagonal joins nodes 0 and 3,
        // whose coupling vanishes because both opposite angles are right.
        let expect = [
            [1.0, -0.5, -0.5, 0.0],
            [-0.5, 1.0, 0.0, -0.5],
            [-0.5, 0.0, 1.0, -0.5],
            [0.0, -0.5, -0.5, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(k.get(i, j), hand[i][j]);
                assert!((hand[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
        assert!(k.is_symmetric(0.0));
        assert!(k.mul_vec(&[1.0; 4]).iter().all(|v| v.abs() < 1e-15));
    }

    fn linear_spec(exact: ScalarField) -> ProblemSpec {
        let mut spec = ProblemSpec::manufactured_poisson([0.0, 0.0, 1.0, 1.0], exact);
        spec.source = Source::Field(ScalarField::Constant(0.0));
        spec
    }

    #[test]
    fn patch_test_on_refined_meshes() {
        let exact = ScalarField::Linear { a: 0.3, b: -1.2, c: 2.0 };
        let spec = linear_spec(exact);
        let mut mesh = build_rect_mesh(4, 3, [0.0, 0.0, 1.0, 1.0]).unwrap();
        for round in 0..3 {
            let u = solve_linear(&mesh, &spec).unwrap();
            for node in mesh.nodes() {
                assert!((u[node.id] - exact.value(node.x, node.y)).abs() < 1e-10);
            }
            let marked = mesh.elements().iter().filter(|e| e.id % 3 == round).map(|e| e.id).collect();
            mesh = mesh.refine(&marked).unwrap();
        }
    }

    #[test]
    fn manufactured_sin_sin_converges_at_second_order() {
        let exact = ScalarField::SinSin { amplitude: 1.0, frequency: 1.0 };
        let spec = ProblemSpec::manufactured_poisson([0.0, 0.0, 1.0, 1.0], exact);
        let errors: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let mesh = build_rect_mesh(n, n, [0.0, 0.0, 1.0, 1.0]).unwrap();
                let u = solve_linear(&mesh, &spec).unwrap();
                let e: Vec<f64> = mesh.nodes().iter().map(|p| u[p.id] - exact.value(p.x, p.y)).collect();
                l2_norm(&mesh, &e).unwrap()
            })
            .collect();
        for w in errors.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((1.8..=2.2).contains(&rate), "{errors:?}");
        }
    }

    #[test]
    fn residual_vanishes_at_discrete_solution() {
        let exact = ScalarField::SinSin { amplitude: 1.0, frequency: 1.0 };
        let spec = ProblemSpec::manufactured_poisson([0.0, 0.0, 1.0, 1.0], exact);
        let mesh = build_rect_mesh(6, 6, [0.0, 0.0, 1.0, 1.0]).unwrap();
        let u = solve_linear(&mesh, &spec).unwrap();
        let p = FemProblem::new(&mesh, &spec).unwrap();
        assert!(norm2(&p.residual(&u).unwrap()) < 1e-10);
    }

    #[test]
    fn jacobian_matches_finite_differences_for_nonlinear_operator() {
        let exact = ScalarField::Quadratic([1.0, 0.5, 0.2, 0.3, 0.1, 0.4]);
        let mut spec = ProblemSpec::manufactured_poisson([0.0, 0.0, 1.0, 1.0], exact);
        spec.diffusion = Diffusion::Conductivity { k0: 1.0, beta: 0.7 };
        spec.reaction = Reaction::Power { coefficient: 0.5, exponent: 3.0 };
        spec.advection = [0.4, -0.2];
        let mesh = build_rect_mesh(4, 4, [0.0, 0.0, 1.0, 1.0]).unwrap();
        let p = FemProblem::new(&mesh, &spec).unwrap();
        let u: Vec<f64> = mesh.nodes().iter().map(|n| 1.0 + 0.3 * n.x * n.y + 0.1 * n.x).collect();
        let j = p.jacobian(&u).unwrap();
        let v: Vec<f64> = (0..u.len()).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let jv = j.mul_vec(&v);
        let h = 1e-6;
        let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let rp = p.residual(&up).unwrap();
        let rm = p.residual(&um).unwrap();
        for i in 0..u.len() {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            assert!((fd - jv[i]).abs() < 1e-6 * (1.0 + fd.abs()), "row {i}: {fd} vs {}", jv[i]);
        }
    }

    #[test]
    fn assemble_linearizes_trace_condition() {
        use crate::problem::{NonlinearBc, PowerLaw};
        let mut spec = linear_spec(ScalarField::Constant(2.0));
        let law = PowerLaw { coefficient: 1.0, exponent: 4.0 };
        spec.boundary.insert(0, BoundaryCondition::Nonlinear(NonlinearBc::new(law, BcData::Exact).unwrap()));
        let mesh = build_rect_mesh(2, 2, [0.0, 0.0, 1.0, 1.0]).unwrap();
        let mut u = alloc::vec![0.0; mesh.num_nodes()];
        // Node 1 is interior to the bottom side; Newton from 3 for u^4 = 16.
        u[1] = 3.0;
        let s = assemble(&mesh, &spec, &u).unwrap();
        let expect = 3.0 - (81.0 - 16.0) / 108.0;
        assert!((s.dirichlet[&1] - expect).abs() < 1e-14);
        // A zero derivative falls back to the root.
        u[1] = 0.0;
        let s = assemble(&mesh, &spec, &u).unwrap();
        assert!((s.dirichlet[&1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn missing_interface_data_is_a_config_error() {
        let spec = ProblemSpec {
            domain: Domain::Rectangle([0.0, 0.0, 1.0, 1.0]),
            boundary: [(0, BoundaryCondition::Dirichlet(BcData::Field(ScalarField::Constant(0.0))))]
                .into_iter()
                .collect(),
            ..linear_spec(ScalarField::Constant(0.0))
        };
        let mesh = build_rect_mesh(2, 2, [0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(FemProblem::new(&mesh, &spec), Err(Error::Config(_))));
    }
}
