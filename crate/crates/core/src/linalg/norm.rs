
#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;
use crate::mesh::{element_gradient, Mesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub enum Norm<'a> {
    /// Plain vector 2-norm.
    Euclidean,
    /// `L2(Omega)` norm of the P1 interpolant (consistent mass matrix).
    L2(&'a Mesh),
    /// Full `H1(Omega)` norm of the P1 interpolant.
    H1(&'a Mesh),
    /// `|grad u|` part of the `H1` norm only.
    H1Seminorm(&'a Mesh),
}

pub fn norm(u: &[f64], kind: Norm<'_>) -> Result<f64> {
    match kind {
        Norm::Euclidean => Ok(super::norm2(u)),
        Norm::L2(mesh) => l2_norm(mesh, u),
        Norm::H1(mesh) => h1_norm(mesh, u),
        Norm::H1Seminorm(mesh) => h1_seminorm(mesh, u),
    }
}

fn check(mesh: &Mesh, u: &[f64]) -> Result<()> {
    if u.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_nodes(),
            found: u.len(),
        });
    }
    Ok(())
}

fn l2_squared(mesh: &Mesh, u: &[f64]) -> f64 {
    // u^T M_e u = |K| / 12 * (sum u_i^2 + (sum u_i)^2) for P1 triangles.
    mesh.elements()
        .iter()
        .map(|e| {
            let vals = e.nodes.map(|n| u[n]);
            let sum: f64 = vals.iter().sum();
            let sq: f64 = vals.iter().map(|v| v * v).sum();
            mesh.area(e.id) / 12.0 * (sq + sum * sum)
        })
        .sum()
}

fn grad_squared(mesh: &Mesh, u: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for e in 0..mesh.num_elements() {
        let g = element_gradient(mesh, u, e)?;
        s += mesh.area(e) * (g[0] * g[0] + g[1] * g[1]);
    }
    Ok(s)
}

pub fn l2_norm(mesh: &Mesh, u: &[f64]) -> Result<f64> {
    check(mesh, u)?;
    Ok(l2_squared(mesh, u).sqrt())
}

pub fn h1_seminorm(mesh: &Mesh, u: &[f64]) -> Result<f64> {
    check(mesh, u)?;
    Ok(grad_squared(mesh, u)?.sqrt())
}

pub fn h1_norm(mesh: &Mesh, u: &[f64]) -> Result<f64> {
    check(mesh, u)?;
    Ok((l2_squared(mesh, u) + grad_squared(mesh, u)?).sqrt())
}
