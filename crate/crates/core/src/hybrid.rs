//! Coupling of a dual-reciprocity region with local finite elements.
//!
//! Critical elements form the FEM core. The FEM subproblem covers the core
//! plus `overlap` layers of neighbouring elements; the DRM region is the
//! complement of the core, so the two overlap. Multiplicative Schwarz
//! alternation exchanges Dirichlet data: the DRM region takes the FEM trace
//! on the core boundary, the FEM subproblem takes DRM values on the outer
//! rim of its overlap layer. Nonlinear boundary data is resolved by Newton's
//! method inside each region solve.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;

use crate::adapt::{adaptive_loop, compute_indicators, AdaptiveReport, GenerationSolve, IndicatorField, RefinementConfig};
use crate::drm::{BoundaryDiscretization, DrmOutcome, DrmProblem, EdgeOrigin, INTERFACE_MARKER};
use crate::fem::{boundary_constraints, FemProblem, NodeConstraint};
use crate::mesh::{edge_key, BoundaryEdge, Element, Mesh, Node};
use crate::newton::{newton_krylov_solve, NewtonConfig, NewtonState};
use crate::{Error, ProblemSpec, Result};

/// Split of the mesh elements into the FEM core and the DRM remainder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPartition {
    pub fem: BTreeSet<usize>,
    pub drm: BTreeSet<usize>,
    /// Nodes belonging to elements of both regions.
    pub interface: BTreeSet<usize>,
}

impl RegionPartition {
    pub fn from_fem_elements(mesh: &Mesh, fem: BTreeSet<usize>) -> Result<RegionPartition> {
        if let Some(&bad) = fem.iter().find(|&&e| e >= mesh.num_elements()) {
            return Err(Error::ElementNotFound(bad));
        }
        let drm: BTreeSet<usize> = (0..mesh.num_elements()).filter(|e| !fem.contains(e)).collect();
        let nodes_of = |set: &BTreeSet<usize>| -> BTreeSet<usize> {
            set.iter().flat_map(|&e| mesh.elements()[e].nodes).collect()
        };
        let interface = nodes_of(&fem).intersection(&nodes_of(&drm)).copied().collect();
        Ok(RegionPartition { fem, drm, interface })
    }
}

pub enum PartitionCriterion<'a> {
    /// Elements whose indicator exceeds the threshold become FEM elements.
    Threshold {
        indicators: &'a IndicatorField,
        threshold: f64,
    },
    Elements(BTreeSet<usize>),
}

pub fn partition_domain(mesh: &Mesh, criterion: PartitionCriterion<'_>) -> Result<RegionPartition> {
    let fem = match criterion {
        PartitionCriterion::Threshold { indicators, threshold } => {
            if indicators.values.len() != mesh.num_elements() {
                return Err(Error::DimensionMismatch {
                    expected: mesh.num_elements(),
                    found: indicators.values.len(),
                });
            }
            (0..mesh.num_elements()).filter(|&e| indicators.values[e] > threshold).collect()
        }
        PartitionCriterion::Elements(set) => set,
    };
    RegionPartition::from_fem_elements(mesh, fem)
}

/// The mesh restricted to `elements`, with nodes renumbered in increasing
/// global order. Edges cut by the restriction carry [`INTERFACE_MARKER`].
/// Returns the submesh and its local-to-global node map.
pub fn submesh(mesh: &Mesh, elements: &BTreeSet<usize>) -> Result<(Mesh, Vec<usize>)> {
    let global: Vec<usize> = elements
        .iter()
        .flat_map(|&e| mesh.element(e).map(|el| el.nodes))
        .flatten()
        .collect::<BTreeSet<usize>>()
        .into_iter()
        .collect();
    if global.len() < 3 {
        return Err(Error::InvalidGeometry("submesh needs at least one element".into()));
    }
    let local: BTreeMap<usize, usize> = global.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let nodes: Vec<Node> = global
        .iter()
        .enumerate()
        .map(|(l, &g)| {
            let [x, y] = mesh.point(g);
            Node { id: l, x, y }
        })
        .collect();
    let markers: BTreeMap<(usize, usize), u32> = mesh
        .boundary_edges()
        .iter()
        .map(|e| (edge_key(e.nodes[0], e.nodes[1]), e.marker))
        .collect();
    let mut owners: BTreeMap<(usize, usize), Vec<([usize; 2], usize)>> = BTreeMap::new();
    let mut out_elements = Vec::with_capacity(elements.len());
    for (id, &e) in elements.iter().enumerate() {
        let el = mesh.elements()[e];
        let n = el.nodes.map(|g| local[&g]);
        out_elements.push(Element {
            id,
            nodes: n,
            generation: el.generation,
            parent: None,
        });
        for k in 0..3 {
            let (a, b) = (el.nodes[k], el.nodes[(k + 1) % 3]);
            owners.entry(edge_key(a, b)).or_default().push(([n[k], n[(k + 1) % 3]], id));
        }
    }
    let edges = owners
        .iter()
        .filter(|(_, o)| o.len() == 1)
        .map(|(key, o)| BoundaryEdge {
            nodes: o[0].0,
            element: o[0].1,
            marker: markers.get(key).copied().unwrap_or(INTERFACE_MARKER),
        })
        .collect();
    Ok((Mesh::from_parts(nodes, out_elements, edges, mesh.generation())?, global))
}

/// Adds `layers` rings of node-adjacent elements around `core`.
pub fn grow(mesh: &Mesh, core: &BTreeSet<usize>, layers: usize) -> BTreeSet<usize> {
    let mut by_node: Vec<Vec<usize>> = alloc::vec![Vec::new(); mesh.num_nodes()];
    for e in mesh.elements() {
        for &n in &e.nodes {
            by_node[n].push(e.id);
        }
    }
    let mut set = core.clone();
    for _ in 0..layers {
        let nodes: BTreeSet<usize> = set.iter().flat_map(|&e| mesh.elements()[e].nodes).collect();
        for n in nodes {
            set.extend(by_node[n].iter().copied());
        }
    }
    set
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridConfig {
    pub newton: NewtonConfig,
    /// Stop once the interface trace changes by less than this (max norm).
    pub coupling_tol: f64,
    pub max_sweeps: usize,
    /// Element layers added around the FEM core; at least 1.
    pub overlap: usize,
    /// Tolerance and iteration cap for nonlinear boundary elements of the
    /// DRM region.
    pub drm_tol: f64,
    pub drm_max_iter: usize,
    /// Constant boundary elements per mesh edge in the DRM region.
    pub boundary_subdivision: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            newton: NewtonConfig::default(),
            coupling_tol: 1e-6,
            max_sweeps: 500,
            overlap: 6,
            drm_tol: 1e-12,
            drm_max_iter: 50,
            boundary_subdivision: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridMode {
    /// Empty FEM region: a single dual-reciprocity solve.
    DrmOnly,
    /// Empty DRM region: a single finite-element Newton solve.
    FemOnly,
    Coupled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridSolution {
    /// Values at every mesh node.
    pub u: Vec<f64>,
    pub mode: HybridMode,
    pub sweeps: usize,
    /// Max change of the interface trace after each sweep.
    pub interface_history: Vec<f64>,
    /// Largest disagreement between the data each region received and the
    /// other region's final values.
    pub interface_mismatch: f64,
    pub converged: bool,
    pub fem_residual: Option<f64>,
    pub drm_residual: Option<f64>,
    pub newton_iterations: usize,
    /// Newton history of the last nonlinear solve: the finite-element solve
    /// of the final sweep, or the boundary-element iteration when no FEM
    /// region exists.
    pub newton_trace: Vec<NewtonState>,
}

/// Interior nodes of the DRM region (not on any boundary chain), ascending.
fn internal_nodes(mesh: &Mesh, region: Option<&BTreeSet<usize>>, boundary: &BoundaryDiscretization) -> Vec<usize> {
    let chain: BTreeSet<usize> = boundary.elements().iter().filter_map(|e| e.origin).flat_map(|o| o.nodes).collect();
    let nodes: BTreeSet<usize> = match region {
        Some(r) => r.iter().flat_map(|&e| mesh.elements()[e].nodes).collect(),
        None => (0..mesh.num_nodes()).collect(),
    };
    nodes.into_iter().filter(|n| !chain.contains(n)).collect()
}

/// Dual-reciprocity region prepared on a mesh.
struct DrmRegion {
    problem: DrmProblem,
    internal: Vec<usize>,
    /// Chain nodes with the indices of the boundary elements touching them.
    chain: BTreeMap<usize, Vec<usize>>,
    constraints: BTreeMap<usize, NodeConstraint>,
}

impl DrmRegion {
    fn new(mesh: &Mesh, spec: &ProblemSpec, region: Option<&BTreeSet<usize>>, per_edge: usize) -> Result<DrmRegion> {
        let boundary = BoundaryDiscretization::from_mesh_subdivided(mesh, region, per_edge)?;
        let internal = internal_nodes(mesh, region, &boundary);
        let points: Vec<[f64; 2]> = internal.iter().map(|&n| mesh.point(n)).collect();
        let iface: BTreeSet<usize> = boundary
            .elements()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.marker == INTERFACE_MARKER)
            .map(|(j, _)| j)
            .collect();
        let problem = DrmProblem::new(spec, &boundary, &points, &iface)?;
        let mut chain: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (j, e) in boundary.elements().iter().enumerate() {
            for n in e.origin.expect("mesh-built elements carry their edge").touched_nodes() {
                chain.entry(n).or_default().push(j);
            }
        }
        // Pointwise boundary data at chain nodes on the physical boundary.
        let physical = boundary_constraints(mesh, spec, &BTreeMap::new())?;
        let constraints = physical.into_iter().filter(|(n, _)| chain.contains_key(n)).collect();
        Ok(DrmRegion {
            problem,
            internal,
            chain,
            constraints,
        })
    }

    fn boundary(&self) -> &BoundaryDiscretization {
        self.problem.system().boundary()
    }

    fn solve(&self, interface: &BTreeMap<usize, f64>, config: &HybridConfig) -> Result<DrmOutcome> {
        self.problem.solve(interface, config.drm_tol, config.drm_max_iter)
    }

    /// Nodal values: internal points directly; chain nodes from pointwise
    /// boundary data when present, else the mean of the adjacent elements.
    fn nodal(&self, out: &DrmOutcome) -> BTreeMap<usize, f64> {
        let nb = self.boundary().len();
        let sol = &out.solution;
        let mut map: BTreeMap<usize, f64> = self.internal.iter().copied().zip(sol.internal_u(nb).iter().copied()).collect();
        for (&node, adj) in &self.chain {
            let value = self
                .constraints
                .get(&node)
                .and_then(NodeConstraint::resolved_value)
                .unwrap_or_else(|| adj.iter().map(|&j| sol.u[j]).sum::<f64>() / adj.len() as f64);
            map.insert(node, value);
        }
        map
    }

    fn residual(out: &DrmOutcome) -> f64 {
        out.trace.last().map_or(0.0, |s| s.residual_norm)
    }
}

fn fem_only(spec: &ProblemSpec, mesh: &Mesh, config: &HybridConfig, warm: Option<&[f64]>) -> Result<HybridSolution> {
    let problem = FemProblem::new(mesh, spec)?;
    let u0 = match warm {
        Some(w) => with_dirichlet(&problem, w),
        None => problem.initial_guess(),
    };
    let out = newton_krylov_solve(&problem, &u0, &config.newton)?;
    Ok(HybridSolution {
        mode: HybridMode::FemOnly,
        sweeps: 0,
        interface_history: Vec::new(),
        interface_mismatch: 0.0,
        converged: out.converged(),
        fem_residual: Some(out.residual_norm()),
        drm_residual: None,
        newton_iterations: out.iterations(),
        newton_trace: out.trace,
        u: out.u,
    })
}

fn with_dirichlet(problem: &FemProblem<'_>, warm: &[f64]) -> Vec<f64> {
    let mut u = warm.to_vec();
    for (&node, c) in problem.constraints() {
        if let NodeConstraint::Dirichlet(v) = *c {
            u[node] = v;
        }
    }
    u
}

fn drm_only(spec: &ProblemSpec, mesh: &Mesh, config: &HybridConfig) -> Result<HybridSolution> {
    let region = DrmRegion::new(mesh, spec, None, config.boundary_subdivision)?;
    let out = region.solve(&BTreeMap::new(), config)?;
    let nodal = region.nodal(&out);
    Ok(HybridSolution {
        u: (0..mesh.num_nodes()).map(|n| nodal[&n]).collect(),
        mode: HybridMode::DrmOnly,
        sweeps: 0,
        interface_history: Vec::new(),
        interface_mismatch: 0.0,
        converged: out.converged,
        fem_residual: None,
        drm_residual: Some(DrmRegion::residual(&out)),
        newton_iterations: out.trace.len() - 1,
        newton_trace: out.trace,
    })
}

/// Solves `spec` on `mesh` with the given partition.
pub fn hybrid_solve(
    spec: &ProblemSpec,
    mesh: &Mesh,
    partition: &RegionPartition,
    config: &HybridConfig,
) -> Result<HybridSolution> {
    hybrid_solve_warm(spec, mesh, partition, config, None)
}

/// [`hybrid_solve`] starting from nodal values `warm`, which seed the first
/// interface trace and the finite-element Newton iterate.
pub fn hybrid_solve_warm(
    spec: &ProblemSpec,
    mesh: &Mesh,
    partition: &RegionPartition,
    config: &HybridConfig,
    warm: Option<&[f64]>,
) -> Result<HybridSolution> {
    if let Some(w) = warm {
        if w.len() != mesh.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_nodes(),
                found: w.len(),
            });
        }
    }
    if partition.fem.len() + partition.drm.len() != mesh.num_elements() || partition.fem.iter().any(|e| partition.drm.contains(e)) {
        return Err(Error::Config("partition regions must be disjoint and cover the mesh".into()));
    }
    if partition.fem.is_empty() {
        return drm_only(spec, mesh, config);
    }
    if partition.drm.is_empty() {
        return fem_only(spec, mesh, config, warm);
    }
    if config.overlap == 0 {
        return Err(Error::Config("coupled solves need an overlap of at least one element layer".into()));
    }

    let core = &partition.fem;
    let drm = DrmRegion::new(mesh, spec, Some(&partition.drm), config.boundary_subdivision)?;
    let extended = grow(mesh, core, config.overlap);
    let (sub, local_to_global) = submesh(mesh, &extended)?;
    let physical = boundary_constraints(mesh, spec, &BTreeMap::new())?;

    // Submesh nodes on cut edges receive DRM data.
    let fem_interface: BTreeSet<usize> = sub
        .boundary_edges()
        .iter()
        .filter(|e| e.marker == INTERFACE_MARKER)
        .flat_map(|e| e.nodes)
        .collect();
    // DRM boundary elements on the core boundary receive the FEM trace.
    let drm_interface: Vec<(usize, EdgeOrigin)> = drm
        .boundary()
        .elements()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.marker == INTERFACE_MARKER)
        .map(|(j, e)| (j, e.origin.expect("mesh-built elements carry their edge")))
        .collect();

    let mut global: Vec<f64> = warm.map_or_else(|| alloc::vec![0.0; mesh.num_nodes()], <[f64]>::to_vec);
    let trace_of = |u: &[f64]| -> BTreeMap<usize, f64> {
        drm_interface.iter().map(|&(j, o)| (j, o.midpoint_value(u))).collect()
    };
    let mut trace = trace_of(&global);
    let mut fem_local: Option<Vec<f64>> = None;
    let mut history = Vec::new();
    let mut newton_iterations = 0;
    let mut fem_residual = None;
    let mut converged = false;
    let mut last_overrides = BTreeMap::new();
    let mut newton_trace = Vec::new();

    for _ in 0..config.max_sweeps {
        let out = drm.solve(&trace, config)?;
        let nodal = drm.nodal(&out);
        let overrides: BTreeMap<usize, f64> = fem_interface
            .iter()
            .map(|&l| {
                let g = local_to_global[l];
                let v = physical.get(&g).and_then(NodeConstraint::resolved_value).or_else(|| nodal.get(&g).copied());
                v.map(|v| (l, v)).ok_or_else(|| {
                    Error::Config(format!("interface node {g} has no value from the boundary-element region"))
                })
            })
            .collect::<Result<_>>()?;
        let problem = FemProblem::with_overrides(&sub, spec, &overrides)?;
        let u0 = match &fem_local {
            Some(prev) => with_dirichlet(&problem, prev),
            None => with_dirichlet(&problem, &local_to_global.iter().map(|&g| global[g]).collect::<Vec<_>>()),
        };
        let fem = newton_krylov_solve(&problem, &u0, &config.newton)?;
        newton_iterations += fem.iterations();
        fem_residual = Some(fem.residual_norm());
        newton_trace = fem.trace;
        for (l, &g) in local_to_global.iter().enumerate() {
            global[g] = fem.u[l];
        }
        let new_trace = trace_of(&global);
        let change = new_trace
            .iter()
            .map(|(j, v)| (v - trace[j]).abs())
            .fold(0.0f64, f64::max);
        history.push(change);
        trace = new_trace;
        fem_local = Some(fem.u);
        last_overrides = overrides;
        if change < config.coupling_tol {
            converged = true;
            break;
        }
        let k = history.len();
        if k > 5 && history[k - 1] >= history[k - 6] {
            break;
        }
    }

    // Final DRM pass on the latest FEM trace.
    let out = drm.solve(&trace, config)?;
    let nodal = drm.nodal(&out);
    let mut mismatch = 0.0f64;
    for (&l, &v) in &last_overrides {
        if let Some(d) = nodal.get(&local_to_global[l]) {
            mismatch = mismatch.max((d - v).abs());
        }
    }
    let fem_nodes: BTreeSet<usize> = local_to_global.iter().copied().collect();
    let u: Vec<f64> = (0..mesh.num_nodes())
        .map(|n| if fem_nodes.contains(&n) { global[n] } else { nodal[&n] })
        .collect();
    Ok(HybridSolution {
        u,
        mode: HybridMode::Coupled,
        sweeps: history.len(),
        interface_history: history,
        interface_mismatch: mismatch,
        converged: converged && out.converged,
        fem_residual,
        drm_residual: Some(DrmRegion::residual(&out)),
        newton_iterations,
        newton_trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdrmConfig {
    pub hybrid: HybridConfig,
    pub refine: RefinementConfig,
    /// Elements whose gradient indicator exceeds this join the FEM region.
    pub fem_threshold: f64,
}

impl Default for HdrmConfig {
    fn default() -> Self {
        HdrmConfig {
            hybrid: HybridConfig::default(),
            refine: RefinementConfig::default(),
            fem_threshold: 2.0,
        }
    }
}

/// Full adaptive hybrid pipeline. Each generation partitions the mesh by the
/// gradient of the previous solution (a plain DRM solve on the first
/// generation), runs [`hybrid_solve_warm`], then marks and refines.
pub fn hdrm_solve(
    spec: &ProblemSpec,
    initial_mesh: &Mesh,
    config: &HdrmConfig,
) -> Result<(Vec<f64>, Mesh, AdaptiveReport, HybridSolution)> {
    let exact = spec.exact;
    let f = move |x: f64, y: f64| exact.map_or(0.0, |e| e.value(x, y));
    let exact_ref: Option<&dyn Fn(f64, f64) -> f64> = if exact.is_some() { Some(&f) } else { None };
    let mut last: Option<HybridSolution> = None;
    let (u, mesh, report) = adaptive_loop(initial_mesh, exact_ref, &config.refine, |mesh, warm| {
        let guide = match warm {
            Some(w) => w.to_vec(),
            None => drm_only(spec, mesh, &config.hybrid)?.u,
        };
        let eta = compute_indicators(&guide, mesh)?;
        let partition = partition_domain(
            mesh,
            PartitionCriterion::Threshold {
                indicators: &eta,
                threshold: config.fem_threshold,
            },
        )?;
        let sol = hybrid_solve_warm(spec, mesh, &partition, &config.hybrid, Some(&guide))?;
        let out = GenerationSolve {
            u: sol.u.clone(),
            newton_iterations: sol.newton_iterations,
            converged: sol.converged,
        };
        last = Some(sol);
        Ok(out)
    })?;
    let last = last.expect("at least one generation runs");
    Ok((u, mesh, report, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drm::drm_solve;
    use crate::field::ScalarField;
    use crate::mesh::build_rect_mesh;
    use crate::newton::KrylovMethod;

    const UNIT: [f64; 4] = [0.0, 0.0, 1.0, 1.0];

    fn config() -> HybridConfig {
        HybridConfig {
            newton: NewtonConfig {
                krylov: KrylovMethod::Bicgstab,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn corner_patch(mesh: &Mesh) -> BTreeSet<usize> {
        mesh.elements()
            .iter()
            .filter(|e| {
                let c = mesh.centroid(e.id);
                c[0] < 0.25 && c[1] < 0.25
            })
            .map(|e| e.id)
            .collect()
    }

    #[test]
    fn partition_criteria() {
        let mesh = build_rect_mesh(4, 4, UNIT).unwrap();
        let eta = IndicatorField { values: (0..mesh.num_elements()).map(|e| e as f64).collect() };
        let none = partition_domain(&mesh, PartitionCriterion::Threshold { indicators: &eta, threshold: f64::INFINITY }).unwrap();
        assert!(none.fem.is_empty() && none.interface.is_empty());
        let all = partition_domain(&mesh, PartitionCriterion::Threshold { indicators: &eta, threshold: -1e-300 }).unwrap();
        assert_eq!(all.fem.len(), mesh.num_elements());
        let patch = corner_patch(&mesh);
        let p = partition_domain(&mesh, PartitionCriterion::Elements(patch.clone())).unwrap();
        assert_eq!(p.fem, patch);
        assert_eq!(p.drm.len() + p.fem.len(), mesh.num_elements());
        // The 2 x 2 corner cell pair meets the rest along a bent line of 3 nodes.
        assert_eq!(p.interface.len(), 3);
        assert!(partition_domain(&mesh, PartitionCriterion::Elements([999].into_iter().collect())).is_err());
    }

    #[test]
    fn submesh_marks_cut_edges() {
        let mesh = build_rect_mesh(4, 4, UNIT).unwrap();
        let patch = corner_patch(&mesh);
        let (sub, map) = submesh(&mesh, &patch).unwrap();
        assert_eq!(sub.num_elements(), patch.len());
        assert_eq!(sub.boundary_edges().iter().filter(|e| e.marker == INTERFACE_MARKER).count(), 2);
        for n in sub.nodes() {
            assert_eq!(mesh.point(map[n.id]), [n.x, n.y]);
        }
        let grown = grow(&mesh, &patch, 1);
        assert!(grown.is_superset(&patch) && grown.len() > patch.len());
    }

    #[test]
    fn empty_fem_region_is_plain_drm() {
        let spec = ProblemSpec::manufactured_poisson(UNIT, ScalarField::Quadratic([0.0, 0.3, 0.1, 1.0, 0.0, -0.5]));
        let mesh = build_rect_mesh(6, 6, UNIT).unwrap();
        let p = RegionPartition::from_fem_elements(&mesh, BTreeSet::new()).unwrap();
        let h = hybrid_solve(&spec, &mesh, &p, &config()).unwrap();
        assert_eq!(h.mode, HybridMode::DrmOnly);
        let boundary = BoundaryDiscretization::from_mesh(&mesh, None).unwrap();
        let interior: Vec<usize> = (0..mesh.num_nodes()).filter(|n| !mesh.boundary_nodes().contains(n)).collect();
        let pts: Vec<[f64; 2]> = interior.iter().map(|&n| mesh.point(n)).collect();
        let d = drm_solve(&spec, &boundary, &pts).unwrap();
        for (k, &n) in interior.iter().enumerate() {
            assert!((h.u[n] - d.internal_u(boundary.len())[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn all_fem_region_is_plain_fem() {
        let spec = ProblemSpec::manufactured_poisson(UNIT, ScalarField::SinSin { amplitude: 1.0, frequency: 1.0 });
        let mesh = build_rect_mesh(6, 6, UNIT).unwrap();
        let p = RegionPartition::from_fem_elements(&mesh, (0..mesh.num_elements()).collect()).unwrap();
        let h = hybrid_solve(&spec, &mesh, &p, &config()).unwrap();
        let fp = FemProblem::new(&mesh, &spec).unwrap();
        let direct = newton_krylov_solve(&fp, &fp.initial_guess(), &config().newton).unwrap();
        assert_eq!(h.mode, HybridMode::FemOnly);
        for (a, b) in h.u.iter().zip(&direct.u) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_patch_laplace() {
        let exact = ScalarField::Linear { a: 0.0, b: 1.0, c: 0.0 };
        let spec = ProblemSpec::manufactured_poisson(UNIT, exact);
        let mesh = build_rect_mesh(8, 8, UNIT).unwrap();
        let p = RegionPartition::from_fem_elements(&mesh, corner_patch(&mesh)).unwrap();
        let h = hybrid_solve(&spec, &mesh, &p, &config()).unwrap();
        assert!(h.converged, "{:?}", h.interface_history);
        assert!(h.interface_mismatch < 1e-6);
        for n in mesh.nodes() {
            assert!((h.u[n.id] - n.x).abs() < 5e-2);
        }
        for w in h.interface_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-15, "{:?}", h.interface_history);
        }
    }

    #[test]
    fn relabeling_the_region_does_not_matter() {
        let exact = ScalarField::Quadratic([0.0, 0.5, 0.0, 1.0, 0.0, 0.0]);
        let spec = ProblemSpec::manufactured_poisson(UNIT, exact);
        let mesh = build_rect_mesh(6, 6, UNIT).unwrap();
        let patch = corner_patch(&mesh);
        let p = RegionPartition::from_fem_elements(&mesh, patch.clone()).unwrap();
        let a = hybrid_solve(&spec, &mesh, &p, &config()).unwrap();
        let q = partition_domain(&mesh, PartitionCriterion::Elements(patch.into_iter().rev().collect())).unwrap();
        let b = hybrid_solve(&spec, &mesh, &q, &config()).unwrap();
        assert_eq!(a.u, b.u);
    }

    #[test]
    fn zero_overlap_is_rejected() {
        let spec = ProblemSpec::manufactured_poisson(UNIT, ScalarField::Constant(1.0));
        let mesh = build_rect_mesh(4, 4, UNIT).unwrap();
        let p = RegionPartition::from_fem_elements(&mesh, corner_patch(&mesh)).unwrap();
        let cfg = HybridConfig { overlap: 0, ..config() };
        assert!(matches!(hybrid_solve(&spec, &mesh, &p, &cfg), Err(Error::Config(_))));
    }
}
