//! Triangulated 2D domains with boundary markings.
//!
//! Meshes are immutable values: [`Mesh::refine`] returns a new mesh. Node ids
//! survive refinement unchanged (new midpoint nodes are appended), which lets
//! nodal vectors be carried across generations by index.

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Boundary markers assigned by [`build_rect_mesh`].
pub const BOTTOM: u32 = 0;
pub const RIGHT: u32 = 1;
pub const TOP: u32 = 2;
pub const LEFT: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    pub id: usize,
    /// Counter-clockwise vertex ids.
    pub nodes: [usize; 3],
    pub generation: u32,
    /// Id of the element this one was cut from, in the previous-generation mesh.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    /// Oriented so that the owning element lies on the left.
    pub nodes: [usize; 2],
    pub element: usize,
    pub marker: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Node>,
    elements: Vec<Element>,
    boundary_edges: Vec<BoundaryEdge>,
    generation: u32,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Uniform triangulation of the rectangle `[x0, x1] x [y0, y1]` given as
/// `corners = [x0, y0, x1, y1]`. Every cell is cut along its rising diagonal.
pub fn build_rect_mesh(nx: usize, ny: usize, corners: [f64; 4]) -> Result<Mesh> {
    let [x0, y0, x1, y1] = corners;
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidGeometry(format!(
            "need at least one cell per direction, got {nx} x {ny}"
        )));
    }
    if corners.iter().any(|c| !c.is_finite()) || !(x1 > x0) || !(y1 > y0) {
        return Err(Error::InvalidGeometry(format!(
            "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
        )));
    }
    let hx = (x1 - x0) / nx as f64;
    let hy = (y1 - y0) / ny as f64;
    let id = |i: usize, j: usize| j * (nx + 1) + i;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Pin the far edges to the exact corner values.
            let x = if i == nx { x1 } else { x0 + i as f64 * hx };
            let y = if j == ny { y1 } else { y0 + j as f64 * hy };
            nodes.push(Node { id: id(i, j), x, y });
        }
    }

    let mut elements = Vec::with_capacity(2 * nx * ny);
    let mut cell_lower = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cell_lower.push(elements.len());
            for tri in [[a, b, c], [a, c, d]] {
                elements.push(Element {
                    id: elements.len(),
                    nodes: tri,
                    generation: 0,
                    parent: None,
                });
            }
        }
    }
    let lower = |i: usize, j: usize| cell_lower[j * nx + i];

    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(i, 0), id(i + 1, 0)],
            element: lower(i, 0),
            marker: BOTTOM,
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(nx, j), id(nx, j + 1)],
            element: lower(nx - 1, j),
            marker: RIGHT,
        });
    }
    for i in (0..nx).rev() {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(i + 1, ny), id(i, ny)],
            element: lower(i, ny - 1) + 1,
            marker: TOP,
        });
    }
    for j in (0..ny).rev() {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(0, j + 1), id(0, j)],
            element: lower(0, j) + 1,
            marker: LEFT,
        });
    }

    Ok(Mesh {
        nodes,
        elements,
        boundary_edges,
        generation: 0,
    })
}

impl Mesh {
    /// Assembles a mesh from raw parts and checks every structural invariant.
    pub fn from_parts(
        nodes: Vec<Node>,
        elements: Vec<Element>,
        boundary_edges: Vec<BoundaryEdge>,
        generation: u32,
    ) -> Result<Mesh> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::InvalidGeometry(format!(
                    "node ids must be 0..N in order; found {} at position {i}",
                    n.id
                )));
            }
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(Error::NonFinite { x: n.x, y: n.y });
            }
        }
        for (i, e) in elements.iter().enumerate() {
            if e.id != i {
                return Err(Error::InvalidGeometry(format!(
                    "element ids must be 0..M in order; found {} at position {i}",
                    e.id
                )));
            }
            if e.nodes.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::InvalidGeometry(format!(
                    "element {i} references a missing node"
                )));
            }
        }
        let mesh = Mesh {
            nodes,
            elements,
            boundary_edges,
            generation,
        };
        for e in &mesh.elements {
            let [a, b, c] = e.nodes;
            if a == b || b == c || a == c || !(mesh.signed_area(e.id) > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "element {} is degenerate or clockwise",
                    e.id
                )));
            }
        }
        mesh.check_conformity()?;
        Ok(mesh)
    }

    pub fn rectangle(nx: usize, ny: usize, corners: [f64; 4]) -> Result<Mesh> {
        build_rect_mesh(nx, ny, corners)
    }

    pub fn unit_square(n: usize) -> Result<Mesh> {
        build_rect_mesh(n, n, [0.0, 0.0, 1.0, 1.0])
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn point(&self, node: usize) -> [f64; 2] {
        let n = &self.nodes[node];
        [n.x, n.y]
    }

    pub fn element(&self, id: usize) -> Result<&Element> {
        self.elements.get(id).ok_or(Error::ElementNotFound(id))
    }

    pub fn vertices(&self, element: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.elements[element].nodes;
        [self.point(a), self.point(b), self.point(c)]
    }

    pub fn signed_area(&self, element: usize) -> f64 {
        let [p0, p1, p2] = self.vertices(element);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn area(&self, element: usize) -> f64 {
        self.signed_area(element).abs()
    }

    /// Sum of element areas, accumulated in element order.
    pub fn total_area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.area(e)).sum()
    }

    pub fn centroid(&self, element: usize) -> [f64; 2] {
        let [p0, p1, p2] = self.vertices(element);
        [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]
    }

    /// Constant gradients of the three barycentric hat functions.
    pub fn shape_gradients(&self, element: usize) -> [[f64; 2]; 3] {
        let [p0, p1, p2] = self.vertices(element);
        let two_area = 2.0 * self.signed_area(element);
        [
            [(p1[1] - p2[1]) / two_area, (p2[0] - p1[0]) / two_area],
            [(p2[1] - p0[1]) / two_area, (p0[0] - p2[0]) / two_area],
            [(p0[1] - p1[1]) / two_area, (p1[0] - p0[0]) / two_area],
        ]
    }

    /// Barycentric coordinates of `(x, y)` with respect to `element`.
    pub fn barycentric(&self, element: usize, x: f64, y: f64) -> [f64; 3] {
        let [p0, p1, p2] = self.vertices(element);
        let two_area = 2.0 * self.signed_area(element);
        let l1 = ((x - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (y - p0[1])) / two_area;
        let l2 = ((p1[0] - p0[0]) * (y - p0[1]) - (x - p0[0]) * (p1[1] - p0[1])) / two_area;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Finds an element containing `(x, y)`, returning it with the
    /// barycentric coordinates of the point. Points on shared edges resolve to
    /// the lowest element id.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = 1e-10;
        for e in 0..self.elements.len() {
            let [p0, p1, p2] = self.vertices(e);
            let (xmin, xmax) = (p0[0].min(p1[0]).min(p2[0]), p0[0].max(p1[0]).max(p2[0]));
            let (ymin, ymax) = (p0[1].min(p1[1]).min(p2[1]), p0[1].max(p1[1]).max(p2[1]));
            let pad = TOL * ((xmax - xmin) + (ymax - ymin));
            if x < xmin - pad || x > xmax + pad || y < ymin - pad || y > ymax + pad {
                continue;
            }
            let bary = self.barycentric(e, x, y);
            if bary.iter().all(|&l| l >= -TOL) {
                return Some((e, bary));
            }
        }
        None
    }

    /// Map from undirected edge to the elements that contain it.
    pub fn edge_elements(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for e in &self.elements {
            for k in 0..3 {
                let key = edge_key(e.nodes[k], e.nodes[(k + 1) % 3]);
                map.entry(key).or_default().push(e.id);
            }
        }
        map
    }

    /// Element ids sharing an edge with `element`.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = alloc::vec![Vec::new(); self.elements.len()];
        for owners in self.edge_elements().values() {
            if let [a, b] = owners[..] {
                out[a].push(b);
                out[b].push(a);
            }
        }
        for list in &mut out {
            list.sort_unstable();
        }
        out
    }

    pub fn boundary_nodes(&self) -> BTreeSet<usize> {
        self.boundary_edges.iter().flat_map(|e| e.nodes).collect()
    }

    /// Verifies that the mesh has no hanging nodes: every edge is shared by
    /// exactly two elements, except the listed boundary edges which belong to
    /// exactly one, and each boundary edge lies in its owning element.
    pub fn check_conformity(&self) -> Result<()> {
        let edges = self.edge_elements();
        let mut boundary = BTreeSet::new();
        for be in &self.boundary_edges {
            let key = edge_key(be.nodes[0], be.nodes[1]);
            let el = self.element(be.element)?;
            if !be.nodes.iter().all(|n| el.nodes.contains(n)) {
                return Err(Error::InvalidGeometry(format!(
                    "boundary edge {:?} is not an edge of element {}",
                    be.nodes, be.element
                )));
            }
            if !boundary.insert(key) {
                return Err(Error::InvalidGeometry(format!(
                    "boundary edge {:?} listed twice",
                    be.nodes
                )));
            }
        }
        for (key, owners) in &edges {
            let on_boundary = boundary.contains(key);
            match (owners.len(), on_boundary) {
                (1, true) | (2, false) => {}
                (1, false) => {
                    return Err(Error::InvalidGeometry(format!(
                        "edge {key:?} has a single element but is not a boundary edge (hanging node)"
                    )))
                }
                (n, _) => {
                    return Err(Error::InvalidGeometry(format!(
                        "edge {key:?} is shared by {n} elements"
                    )))
                }
            }
        }
        if boundary.iter().any(|k| !edges.contains_key(k)) {
            return Err(Error::InvalidGeometry(
                "boundary edge missing from the element list".into(),
            ));
        }
        Ok(())
    }

    /// Red (edge-midpoint) refinement of `marked`, closed conformingly.
    ///
    /// Each marked element is split into four similar children. Neighbours
    /// left with a hanging midpoint are closed by bisection: any element with
    /// a refined edge also refines its longest edge, then splits green (one
    /// edge), blue (two edges) or red (three edges). Children record the
    /// parent's id and sit one generation deeper.
    pub fn refine(&self, marked: &BTreeSet<usize>) -> Result<Mesh> {
        if let Some(&bad) = marked.iter().find(|&&e| e >= self.elements.len()) {
            return Err(Error::ElementNotFound(bad));
        }
        if marked.is_empty() {
            return Ok(self.clone());
        }

        let mut split: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &e in marked {
            let n = self.elements[e].nodes;
            for k in 0..3 {
                split.insert(edge_key(n[k], n[(k + 1) % 3]));
            }
        }
        let longest: Vec<usize> = (0..self.elements.len()).map(|e| self.longest_edge(e)).collect();
        loop {
            let mut changed = false;
            for e in &self.elements {
                let n = e.nodes;
                let keys = [0, 1, 2].map(|k| edge_key(n[k], n[(k + 1) % 3]));
                if keys.iter().any(|k| split.contains(k)) && split.insert(keys[longest[e.id]]) {
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut nodes = self.nodes.clone();
        let mut midpoint = BTreeMap::new();
        for &(a, b) in &split {
            let id = nodes.len();
            let (pa, pb) = (self.point(a), self.point(b));
            nodes.push(Node {
                id,
                x: 0.5 * (pa[0] + pb[0]),
                y: 0.5 * (pa[1] + pb[1]),
            });
            midpoint.insert((a, b), id);
        }
        let mid = |a: usize, b: usize| midpoint.get(&edge_key(a, b)).copied();

        let mut elements = Vec::with_capacity(self.elements.len() + 3 * marked.len());
        for e in &self.elements {
            let n = e.nodes;
            let m = [0, 1, 2].map(|k| mid(n[k], n[(k + 1) % 3]));
            let count = m.iter().filter(|x| x.is_some()).count();
            let children: Vec<[usize; 3]> = match count {
                0 => alloc::vec![n],
                3 => {
                    let (m0, m1, m2) = (m[0].unwrap(), m[1].unwrap(), m[2].unwrap());
                    alloc::vec![
                        [n[0], m0, m2],
                        [m0, n[1], m1],
                        [m2, m1, n[2]],
                        [m0, m1, m2],
                    ]
                }
                _ => {
                    // Rotate so the longest edge is (p, q) with apex r.
                    let k = longest[e.id];
                    let (p, q, r) = (n[k], n[(k + 1) % 3], n[(k + 2) % 3]);
                    let mpq = m[k].expect("closure marks the longest edge");
                    let mqr = m[(k + 1) % 3];
                    let mrp = m[(k + 2) % 3];
                    match (mqr, mrp) {
                        (None, None) => alloc::vec![[p, mpq, r], [mpq, q, r]],
                        (Some(m1), None) => {
                            alloc::vec![[p, mpq, r], [mpq, q, m1], [mpq, m1, r]]
                        }
                        (None, Some(m2)) => {
                            alloc::vec![[p, mpq, m2], [m2, mpq, r], [mpq, q, r]]
                        }
                        (Some(_), Some(_)) => unreachable!("three split edges handled above"),
                    }
                }
            };
            if count == 0 {
                elements.push(Element {
                    id: elements.len(),
                    ..*e
                });
            } else {
                for tri in children {
                    elements.push(Element {
                        id: elements.len(),
                        nodes: tri,
                        generation: e.generation + 1,
                        parent: Some(e.id),
                    });
                }
            }
        }

        let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for e in &elements {
            for k in 0..3 {
                owner.insert(edge_key(e.nodes[k], e.nodes[(k + 1) % 3]), e.id);
            }
        }
        let mut boundary_edges = Vec::with_capacity(self.boundary_edges.len());
        for be in &self.boundary_edges {
            let [a, b] = be.nodes;
            let pieces = match mid(a, b) {
                Some(m) => alloc::vec![[a, m], [m, b]],
                None => alloc::vec![[a, b]],
            };
            for piece in pieces {
                boundary_edges.push(BoundaryEdge {
                    nodes: piece,
                    element: owner[&edge_key(piece[0], piece[1])],
                    marker: be.marker,
                });
            }
        }

        let refined = Mesh {
            nodes,
            elements,
            boundary_edges,
            generation: self.generation + 1,
        };
        debug_assert!(refined.check_conformity().is_ok());
        Ok(refined)
    }

    /// Local index `k` of the longest edge `(n[k], n[k+1])`; ties go to the
    /// smaller global edge key so neighbours agree.
    fn longest_edge(&self, element: usize) -> usize {
        let n = self.elements[element].nodes;
        let len2 = |k: usize| {
            let (a, b) = (self.point(n[k]), self.point(n[(k + 1) % 3]));
            (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)
        };
        let mut best = 0;
        for k in 1..3 {
            let (lk, lb) = (len2(k), len2(best));
            let key_k = edge_key(n[k], n[(k + 1) % 3]);
            let key_b = edge_key(n[best], n[(best + 1) % 3]);
            if lk > lb || (lk == lb && key_k < key_b) {
                best = k;
            }
        }
        best
    }
}

/// Free-function form of [`Mesh::refine`].
pub fn refine_elements(mesh: &Mesh, marked: &BTreeSet<usize>) -> Result<Mesh> {
    mesh.refine(marked)
}

/// Gradient of the linear interpolant of the nodal field `u` on `element`.
pub fn element_gradient(mesh: &Mesh, u: &[f64], element: usize) -> Result<[f64; 2]> {
    if u.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_nodes(),
            found: u.len(),
        });
    }
    let el = mesh.element(element)?;
    let grads = mesh.shape_gradients(element);
    let mut g = [0.0; 2];
    for (k, &n) in el.nodes.iter().enumerate() {
        g[0] += grads[k][0] * u[n];
        g[1] += grads[k][1] * u[n];
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(nx: usize, ny: usize) -> Mesh {
        build_rect_mesh(nx, ny, [0.0, 0.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn single_cell_square() {
        let m = unit(1, 1);
        assert_eq!(m.num_elements(), 2);
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.boundary_edges().len(), 4);
        m.check_conformity().unwrap();
    }

    #[test]
    fn two_by_two_counts() {
        let m = unit(2, 2);
        assert_eq!(m.num_elements(), 8);
        assert_eq!(m.num_nodes(), 9);
    }

    #[test]
    fn three_by_one_area() {
        let m = unit(3, 1);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        assert_eq!(m.num_elements(), 6);
    }

    #[test]
    fn degenerate_rectangle_rejected() {
        assert!(matches!(
            build_rect_mesh(2, 2, [0.0, 0.0, 0.0, 1.0]),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(matches!(
            build_rect_mesh(0, 2, [0.0, 0.0, 1.0, 1.0]),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn boundary_edges_are_counter_clockwise() {
        let m = build_rect_mesh(3, 2, [-1.0, 0.0, 2.0, 1.0]).unwrap();
        // Element must be on the left of every boundary edge.
        for be in m.boundary_edges() {
            let a = m.point(be.nodes[0]);
            let b = m.point(be.nodes[1]);
            let c = m.centroid(be.element);
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            assert!(cross > 0.0);
        }
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = unit(2, 2);
        let r = m.refine(&BTreeSet::new()).unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn unknown_element_is_rejected() {
        let m = unit(1, 1);
        let marked: BTreeSet<usize> = [5].into_iter().collect();
        assert_eq!(m.refine(&marked), Err(Error::ElementNotFound(5)));
    }

    #[test]
    fn isolated_interior_element_gets_four_children() {
        let m = unit(4, 4);
        // Lower triangle of cell (1, 1), away from the boundary.
        let target = 2 * (4 + 1);
        let parent_area = m.area(target);
        let marked: BTreeSet<usize> = [target].into_iter().collect();
        let r = m.refine(&marked).unwrap();
        r.check_conformity().unwrap();
        let children: Vec<&Element> = r
            .elements()
            .iter()
            .filter(|e| e.parent == Some(target))
            .collect();
        assert_eq!(children.len(), 4);
        for c in children {
            assert!((r.area(c.id) - parent_area / 4.0).abs() < 1e-15);
            assert_eq!(c.generation, 1);
        }
        assert!((r.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn both_triangles_of_unit_square() {
        let m = unit(1, 1);
        let r = m.refine(&[0, 1].into_iter().collect()).unwrap();
        assert_eq!(r.num_elements(), 8);
        // Oracle: sum the shoelace areas directly from coordinates.
        let mut total = 0.0;
        for e in r.elements() {
            let p: Vec<[f64; 2]> = e.nodes.iter().map(|&n| r.point(n)).collect();
            total += 0.5
                * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                    - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(r.boundary_edges().len(), 8);
        assert_eq!(r.generation(), 1);
    }

    #[test]
    fn repeated_local_refinement_stays_conforming() {
        let mut m = unit(2, 2);
        for _ in 0..6 {
            // Always refine the element touching the origin.
            let (e, _) = m.locate(1e-3, 1e-3).unwrap();
            m = m.refine(&[e].into_iter().collect()).unwrap();
            m.check_conformity().unwrap();
            assert!((m.total_area() - 1.0).abs() < 1e-12);
        }
        // Bisection closure keeps angles bounded away from zero.
        for e in 0..m.num_elements() {
            let [a, b, c] = m.vertices(e);
            let l = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            let longest = l(a, b).max(l(b, c)).max(l(c, a));
            assert!(m.area(e) / (longest * longest) > 0.1);
        }
    }

    #[test]
    fn hanging_node_detected() {
        let m = unit(1, 1);
        // Split only element 0 by hand: its diagonal gets a midpoint that
        // element 1 does not see.
        let mut nodes = m.nodes().to_vec();
        nodes.push(Node { id: 4, x: 0.5, y: 0.5 });
        let elements = alloc::vec![
            Element { id: 0, nodes: [0, 1, 4], generation: 1, parent: Some(0) },
            Element { id: 1, nodes: [1, 2, 4], generation: 1, parent: Some(0) },
            Element { id: 2, nodes: [0, 2, 3], generation: 0, parent: None },
        ];
        let edges = alloc::vec![
            BoundaryEdge { nodes: [0, 1], element: 0, marker: BOTTOM },
            BoundaryEdge { nodes: [1, 2], element: 1, marker: RIGHT },
            BoundaryEdge { nodes: [2, 3], element: 2, marker: TOP },
            BoundaryEdge { nodes: [3, 0], element: 2, marker: LEFT },
        ];
        assert!(Mesh::from_parts(nodes, elements, edges, 1).is_err());
    }

    #[test]
    fn gradient_of_constant_and_linear_fields() {
        let m = build_rect_mesh(3, 2, [0.0, 0.0, 2.0, 1.0]).unwrap();
        let c = alloc::vec![4.2; m.num_nodes()];
        let x: Vec<f64> = m.nodes().iter().map(|n| n.x).collect();
        let lin: Vec<f64> = m.nodes().iter().map(|n| 2.0 * n.x + 3.0 * n.y).collect();
        for e in 0..m.num_elements() {
            let g = element_gradient(&m, &c, e).unwrap();
            assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14);
            let g = element_gradient(&m, &x, e).unwrap();
            assert!((g[0] - 1.0).abs() < 1e-13 && g[1].abs() < 1e-13);
            let g = element_gradient(&m, &lin, e).unwrap();
            assert!((g[0] - 2.0).abs() < 1e-13 && (g[1] - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_dimension_mismatch() {
        let m = unit(1, 1);
        assert_eq!(
            element_gradient(&m, &[0.0; 3], 0),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        );
    }

    proptest! {
        #[test]
        fn refinement_preserves_area_and_conformity(
            n in 1usize..5,
            picks in proptest::collection::vec(0usize..1000, 0..8),
            gx in 0.2f64..3.0,
            gy in 0.2f64..3.0,
        ) {
            let m = build_rect_mesh(n, n + 1, [-0.5, 1.0, -0.5 + gx, 1.0 + gy]).unwrap();
            let marked: BTreeSet<usize> = picks.iter().map(|p| p % m.num_elements()).collect();
            let r = m.refine(&marked).unwrap();
            r.check_conformity().unwrap();
            let area = gx * gy;
            prop_assert!((r.total_area() - area).abs() <= 1e-12 * area);
            if !marked.is_empty() {
                prop_assert!(r.num_elements() > m.num_elements());
            }
            for e in 0..r.num_elements() {
                prop_assert!(r.signed_area(e) > 0.0);
            }
        }

        #[test]
        fn linear_fields_have_exact_gradients_after_refinement(
            a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
            picks in proptest::collection::vec(0usize..100, 1..5),
        ) {
            let m = unit(3, 3);
            let marked: BTreeSet<usize> = picks.iter().map(|p| p % m.num_elements()).collect();
            let r = m.refine(&marked).unwrap();
            let u: Vec<f64> = r.nodes().iter().map(|n| a + b * n.x + c * n.y).collect();
            for e in 0..r.num_elements() {
                let g = element_gradient(&r, &u, e).unwrap();
                prop_assert!((g[0] - b).abs() < 1e-11 && (g[1] - c).abs() < 1e-11);
            }
        }
    }
}
