//! Plain-text mesh files.
//!
//! ```text
//! nodes N elements M edges B
//! <id> <x> <y>                 N lines
//! <id> <n0> <n1> <n2> <gen>    M lines, counter-clockwise
//! <n0> <n1> <marker>           B boundary edges
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Boundary edges may
//! be listed in either orientation; reading reorients them so the owning
//! element lies on the left.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use hdrm_core::mesh::{BoundaryEdge, Element, Mesh, Node};

use crate::error::{DriverError, Issue, Result};

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "nodes {} elements {} edges {}",
        mesh.num_nodes(),
        mesh.num_elements(),
        mesh.boundary_edges().len()
    );
    for n in mesh.nodes() {
        let _ = writeln!(out, "{} {:?} {:?}", n.id, n.x, n.y);
    }
    for e in mesh.elements() {
        let [a, b, c] = e.nodes;
        let _ = writeln!(out, "{} {a} {b} {c} {}", e.id, e.generation);
    }
    for e in mesh.boundary_edges() {
        let _ = writeln!(out, "{} {} {}", e.nodes[0], e.nodes[1], e.marker);
    }
    out
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh)).map_err(|e| DriverError::io(path, e))
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| DriverError::io(path, e))?;
    parse_mesh(&text)
}

fn fields<'a>(line: usize, text: &'a str, n: usize) -> std::result::Result<Vec<&'a str>, Issue> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != n {
        return Err(Issue::at(line, format!("expected {n} fields, found {}", parts.len())));
    }
    Ok(parts)
}

fn parse<T: std::str::FromStr>(line: usize, s: &str) -> std::result::Result<T, Issue> {
    s.parse().map_err(|_| Issue::at(line, format!("malformed number `{s}`")))
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let invalid = |issue: Issue| DriverError::Validation(vec![issue]);

    let (hl, header) = lines.next().ok_or_else(|| invalid(Issue::general("empty mesh file")))?;
    let h = fields(hl, header, 6).map_err(invalid)?;
    if h[0] != "nodes" || h[2] != "elements" || h[4] != "edges" {
        return Err(invalid(Issue::at(hl, "header must read `nodes N elements M edges B`")));
    }
    let nn: usize = parse(hl, h[1]).map_err(invalid)?;
    let ne: usize = parse(hl, h[3]).map_err(invalid)?;
    let nb: usize = parse(hl, h[5]).map_err(invalid)?;

    let mut issues = Vec::new();
    let mut take = |what: &str| {
        let next = lines.next();
        if next.is_none() {
            issues.push(Issue::general(format!("file ends before all {what} were read")));
        }
        next
    };

    let mut nodes = Vec::with_capacity(nn);
    for _ in 0..nn {
        let Some((l, t)) = take("nodes") else { break };
        let node = fields(l, t, 3).and_then(|f| {
            Ok(Node { id: parse(l, f[0])?, x: parse(l, f[1])?, y: parse(l, f[2])? })
        });
        match node {
            Ok(n) => nodes.push(n),
            Err(e) => return Err(invalid(e)),
        }
    }
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let Some((l, t)) = take("elements") else { break };
        let element = fields(l, t, 5).and_then(|f| {
            Ok(Element {
                id: parse(l, f[0])?,
                nodes: [parse(l, f[1])?, parse(l, f[2])?, parse(l, f[3])?],
                generation: parse(l, f[4])?,
                parent: None,
            })
        });
        match element {
            Ok(e) => elements.push(e),
            Err(e) => return Err(invalid(e)),
        }
    }
    let mut raw_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let Some((l, t)) = take("boundary edges") else { break };
        let edge = fields(l, t, 3).and_then(|f| {
            Ok((l, [parse::<usize>(l, f[0])?, parse::<usize>(l, f[1])?], parse::<u32>(l, f[2])?))
        });
        match edge {
            Ok(e) => raw_edges.push(e),
            Err(e) => return Err(invalid(e)),
        }
    }
    if let Some((l, _)) = lines.next() {
        return Err(invalid(Issue::at(l, "unexpected content after the boundary edges")));
    }
    if !issues.is_empty() {
        return Err(DriverError::Validation(issues));
    }

    // Directed element edges, so each boundary edge finds its owner and orientation.
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for e in &elements {
        for k in 0..3 {
            directed.insert((e.nodes[k], e.nodes[(k + 1) % 3]), e.id);
        }
    }
    let mut boundary = Vec::with_capacity(nb);
    for (l, [a, b], marker) in raw_edges {
        let edge = if let Some(&el) = directed.get(&(a, b)) {
            BoundaryEdge { nodes: [a, b], element: el, marker }
        } else if let Some(&el) = directed.get(&(b, a)) {
            BoundaryEdge { nodes: [b, a], element: el, marker }
        } else {
            return Err(invalid(Issue::at(l, format!("edge {a}-{b} is not an element edge"))));
        };
        boundary.push(edge);
    }
    let generation = elements.iter().map(|e| e.generation).max().unwrap_or(0);
    Ok(Mesh::from_parts(nodes, elements, boundary, generation)?)
}

/// Summary printed by `mesh-info`.
pub fn describe(mesh: &Mesh) -> String {
    let areas: Vec<f64> = (0..mesh.num_elements()).map(|e| mesh.area(e)).collect();
    let min = areas.iter().copied().fold(f64::INFINITY, f64::min);
    let max = areas.iter().copied().fold(0.0f64, f64::max);
    let mut markers: BTreeMap<u32, usize> = BTreeMap::new();
    for e in mesh.boundary_edges() {
        *markers.entry(e.marker).or_default() += 1;
    }
    let mut out = String::new();
    let _ = writeln!(out, "nodes          {}", mesh.num_nodes());
    let _ = writeln!(out, "elements       {}", mesh.num_elements());
    let _ = writeln!(out, "boundary edges {}", mesh.boundary_edges().len());
    let _ = writeln!(out, "generation     {}", mesh.generation());
    let _ = writeln!(out, "area           {}", mesh.total_area());
    let _ = writeln!(out, "element area   min {min} max {max}");
    for (m, count) in markers {
        let _ = writeln!(out, "marker {m}       {count} edges");
    }
    out
}
