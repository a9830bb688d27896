//! Problem description for
//!
//! ```text
//! -div(A(x, u) grad u) + b . grad u + C(x, u) = f   in Omega
//! ```
//!
//! with Dirichlet, Neumann (`A grad u . n = g`) or nonlinear power-law
//! (`k u^p = h`) conditions on each marked boundary segment.

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::field::ScalarField;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// `[x0, y0, x1, y1]`; markers 0..4 are bottom, right, top, left.
    Rectangle([f64; 4]),
    /// Counter-clockwise vertices; side `i` runs from vertex `i` to `i + 1`
    /// and carries marker `i`.
    Polygon(Vec<[f64; 2]>),
}

impl Domain {
    pub fn num_segments(&self) -> usize {
        match self {
            Domain::Rectangle(_) => 4,
            Domain::Polygon(v) => v.len(),
        }
    }

    /// Counter-clockwise corner list.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        match self {
            Domain::Rectangle([x0, y0, x1, y1]) => {
                alloc::vec![[*x0, *y0], [*x1, *y0], [*x1, *y1], [*x0, *y1]]
            }
            Domain::Polygon(v) => v.clone(),
        }
    }

    pub fn area(&self) -> f64 {
        let v = self.vertices();
        let n = v.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
    }
}

/// Diffusion tensor `A(x, u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusion {
    Identity,
    /// Constant (symmetric positive definite) tensor.
    Tensor([[f64; 2]; 2]),
    /// Temperature-dependent conductivity `k0 (1 + beta u) I`.
    Conductivity { k0: f64, beta: f64 },
}

impl Diffusion {
    pub fn tensor(&self, u: f64) -> [[f64; 2]; 2] {
        match *self {
            Diffusion::Identity => [[1.0, 0.0], [0.0, 1.0]],
            Diffusion::Tensor(a) => a,
            Diffusion::Conductivity { k0, beta } => {
                let k = k0 * (1.0 + beta * u);
                [[k, 0.0], [0.0, k]]
            }
        }
    }

    /// `dA/du`
    pub fn derivative(&self, _u: f64) -> [[f64; 2]; 2] {
        match *self {
            Diffusion::Identity | Diffusion::Tensor(_) => [[0.0; 2]; 2],
            Diffusion::Conductivity { k0, beta } => [[k0 * beta, 0.0], [0.0, k0 * beta]],
        }
    }

    pub fn is_identity(&self) -> bool {
        match *self {
            Diffusion::Identity => true,
            Diffusion::Tensor(a) => a == [[1.0, 0.0], [0.0, 1.0]],
            Diffusion::Conductivity { k0, beta } => k0 == 1.0 && beta == 0.0,
        }
    }

    pub fn depends_on_u(&self) -> bool {
        matches!(*self, Diffusion::Conductivity { beta, .. } if beta != 0.0)
    }
}

/// Returns true for a symmetric positive definite 2x2 tensor.
pub fn is_spd(a: [[f64; 2]; 2]) -> bool {
    let sym = (a[0][1] - a[1][0]).abs() <= 1e-12 * (a[0][1].abs() + a[1][0].abs()).max(1.0);
    sym && a[0][0] > 0.0 && a[0][0] * a[1][1] - a[0][1] * a[1][0] > 0.0
}

/// Zeroth-order term `C(x, u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reaction {
    None,
    /// `c0 + c1 u`
    Linear { c0: f64, c1: f64 },
    /// `coefficient * u^exponent`
    Power { coefficient: f64, exponent: f64 },
}

impl Reaction {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Reaction::None => 0.0,
            Reaction::Linear { c0, c1 } => c0 + c1 * u,
            Reaction::Power { coefficient, exponent } => coefficient * power(u, exponent),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Reaction::None => 0.0,
            Reaction::Linear { c1, .. } => c1,
            Reaction::Power { coefficient, exponent } => coefficient * exponent * power(u, exponent - 1.0),
        }
    }

    pub fn depends_on_u(&self) -> bool {
        match *self {
            Reaction::None => false,
            Reaction::Linear { c1, .. } => c1 != 0.0,
            Reaction::Power { coefficient, exponent } => coefficient != 0.0 && exponent != 0.0,
        }
    }
}

/// `u^p`, using integer powers when `p` is integral so negative bases stay finite.
pub fn power(u: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
        u.powi(p as i32)
    } else {
        u.powf(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Field(ScalarField),
    /// `f` derived by applying the operator to the exact solution.
    Manufactured,
}

/// Boundary data: either an explicit field or derived from the exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcData {
    Field(ScalarField),
    Exact,
}

/// `B(u) = coefficient * u^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn value(&self, u: f64) -> f64 {
        self.coefficient * power(u, self.exponent)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.coefficient * self.exponent * power(u, self.exponent - 1.0)
    }
}

/// Nonlinear boundary condition `B(u) = h(x)` imposed pointwise on the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearBc {
    pub law: PowerLaw,
    pub target: BcData,
}

impl NonlinearBc {
    /// Builds the condition after checking `dB/du` against central
    /// differences (relative error below 1e-5) at a few positive probe points.
    pub fn new(law: PowerLaw, target: BcData) -> Result<NonlinearBc> {
        if law.coefficient == 0.0 || law.exponent == 0.0 || !law.coefficient.is_finite() || !law.exponent.is_finite() {
            return Err(Error::Config(format!(
                "power law {} u^{} has no usable derivative",
                law.coefficient, law.exponent
            )));
        }
        for u in [0.5, 1.0, 1.7, 3.0] {
            let h = 1e-6 * u;
            let fd = (law.value(u + h) - law.value(u - h)) / (2.0 * h);
            let an = law.derivative(u);
            let rel = (fd - an).abs() / an.abs().max(1e-300);
            if !(rel < 1e-5) {
                return Err(Error::InconsistentDerivative { u, relative_error: rel });
            }
        }
        Ok(NonlinearBc { law, target })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet(BcData),
    /// Prescribed flux `A grad u . n`.
    Neumann(BcData),
    Nonlinear(NonlinearBc),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub diffusion: Diffusion,
    pub advection: [f64; 2],
    pub reaction: Reaction,
    pub source: Source,
    /// One condition per boundary marker.
    pub boundary: BTreeMap<u32, BoundaryCondition>,
    pub exact: Option<ScalarField>,
}

impl ProblemSpec {
    /// Poisson problem `-lap u = f` on a rectangle with Dirichlet data taken
    /// from `exact` on all four sides and a manufactured source.
    pub fn manufactured_poisson(corners: [f64; 4], exact: ScalarField) -> ProblemSpec {
        ProblemSpec {
            domain: Domain::Rectangle(corners),
            diffusion: Diffusion::Identity,
            advection: [0.0, 0.0],
            reaction: Reaction::None,
            source: Source::Manufactured,
            boundary: (0..4).map(|m| (m, BoundaryCondition::Dirichlet(BcData::Exact))).collect(),
            exact: Some(exact),
        }
    }

    /// Checks that every boundary segment has a condition, that data derived
    /// from the exact solution has one to derive from, and that the
    /// coefficients are admissible.
    pub fn validate(&self) -> core::result::Result<(), Vec<String>> {
        let mut errors = Vec::new();
        let n = self.domain.num_segments();
        if let Domain::Polygon(v) = &self.domain {
            if v.len() < 3 {
                errors.push(format!("polygon needs at least 3 vertices, got {}", v.len()));
            }
        }
        if let Domain::Rectangle([x0, y0, x1, y1]) = self.domain {
            if !(x1 > x0 && y1 > y0) {
                errors.push(format!("degenerate rectangle {x0} {y0} {x1} {y1}"));
            }
        }
        if self.domain.area() <= 0.0 {
            errors.push("domain must be counter-clockwise with positive area".into());
        }
        for m in 0..n as u32 {
            if !self.boundary.contains_key(&m) {
                errors.push(format!("boundary segment {m} has no condition"));
            }
        }
        for m in self.boundary.keys() {
            if *m as usize >= n {
                errors.push(format!("boundary condition for unknown segment {m}"));
            }
        }
        let needs_exact = matches!(self.source, Source::Manufactured)
            || self.boundary.values().any(|bc| {
                matches!(
                    bc,
                    BoundaryCondition::Dirichlet(BcData::Exact)
                        | BoundaryCondition::Neumann(BcData::Exact)
                        | BoundaryCondition::Nonlinear(NonlinearBc { target: BcData::Exact, .. })
                )
            });
        if needs_exact && self.exact.is_none() {
            errors.push("manufactured data requested but no exact solution given".into());
        }
        match self.diffusion {
            Diffusion::Tensor(a) if !is_spd(a) => {
                errors.push(format!("diffusion tensor {a:?} is not symmetric positive definite"))
            }
            Diffusion::Conductivity { k0, .. } if !(k0 > 0.0) => {
                errors.push(format!("conductivity k0 = {k0} must be positive"))
            }
            _ => {}
        }
        for (m, bc) in &self.boundary {
            if let BoundaryCondition::Nonlinear(nl) = bc {
                if let Err(e) = NonlinearBc::new(nl.law, nl.target) {
                    errors.push(format!("segment {m}: {e}"));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    fn exact_field(&self) -> Result<&ScalarField> {
        self.exact
            .as_ref()
            .ok_or_else(|| Error::Config("no exact solution to derive data from".into()))
    }

    pub fn exact_value(&self, x: f64, y: f64) -> Option<f64> {
        self.exact.as_ref().map(|e| e.value(x, y))
    }

    /// Source term `f(x)`.
    pub fn source_value(&self, x: f64, y: f64) -> Result<f64> {
        match self.source {
            Source::Field(f) => Ok(f.value(x, y)),
            Source::Manufactured => {
                let ex = self.exact_field()?;
                let u = ex.value(x, y);
                let g = ex.gradient(x, y);
                let h = ex.hessian(x, y);
                let a = self.diffusion.tensor(u);
                let da = self.diffusion.derivative(u);
                // div(A(u) grad u) = A : H + (dA/du grad u) . grad u
                let mut div = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        div += a[i][j] * h[i][j] + da[i][j] * g[j] * g[i];
                    }
                }
                let adv = self.advection[0] * g[0] + self.advection[1] * g[1];
                Ok(-div + adv + self.reaction.value(u))
            }
        }
    }

    fn data_value(&self, data: &BcData, x: f64, y: f64) -> Result<f64> {
        match data {
            BcData::Field(f) => Ok(f.value(x, y)),
            BcData::Exact => Ok(self.exact_field()?.value(x, y)),
        }
    }

    pub fn condition(&self, marker: u32) -> Result<&BoundaryCondition> {
        self.boundary
            .get(&marker)
            .ok_or_else(|| Error::Config(format!("no boundary condition for segment {marker}")))
    }

    /// Prescribed value `g` of a Dirichlet segment.
    pub fn dirichlet_value(&self, data: &BcData, x: f64, y: f64) -> Result<f64> {
        self.data_value(data, x, y)
    }

    /// Prescribed flux of a Neumann segment at a point with outward normal `n`.
    pub fn neumann_value(&self, data: &BcData, x: f64, y: f64, n: [f64; 2]) -> Result<f64> {
        match data {
            BcData::Field(f) => Ok(f.value(x, y)),
            BcData::Exact => {
                let ex = self.exact_field()?;
                let g = ex.gradient(x, y);
                let a = self.diffusion.tensor(ex.value(x, y));
                let flux = [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]];
                Ok(flux[0] * n[0] + flux[1] * n[1])
            }
        }
    }

    /// Target `h(x)` of a nonlinear segment; `Exact` means `h = B(u_exact)`.
    pub fn nonlinear_target(&self, bc: &NonlinearBc, x: f64, y: f64) -> Result<f64> {
        match bc.target {
            BcData::Field(f) => Ok(f.value(x, y)),
            BcData::Exact => Ok(bc.law.value(self.exact_field()?.value(x, y))),
        }
    }

    pub fn has_nonlinear_boundary(&self) -> bool {
        self.boundary.values().any(|bc| matches!(bc, BoundaryCondition::Nonlinear(_)))
    }

    /// True when the interior operator is linear in `u`.
    pub fn is_linear_interior(&self) -> bool {
        !self.diffusion.depends_on_u() && !self.reaction.depends_on_u()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_source_for_sin_sin() {
        let p = ProblemSpec::manufactured_poisson(
            [0.0, 0.0, 1.0, 1.0],
            ScalarField::SinSin { amplitude: 1.0, frequency: 1.0 },
        );
        let (x, y) = (0.3, 0.7);
        let expected = 2.0 * core::f64::consts::PI.powi(2) * (core::f64::consts::PI * x).sin() * (core::f64::consts::PI * y).sin();
        assert!((p.source_value(x, y).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn manufactured_source_with_conductivity() {
        // u = x^2: -(k(u) u')' = -(k0 (1 + b x^2) 2x)' = -k0 (2 + 6 b x^2)
        let mut p = ProblemSpec::manufactured_poisson(
            [0.0, 0.0, 1.0, 1.0],
            ScalarField::Quadratic([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        );
        p.diffusion = Diffusion::Conductivity { k0: 2.0, beta: 0.5 };
        let x = 0.4;
        let expected = -2.0 * (2.0 + 6.0 * 0.5 * x * x);
        assert!((p.source_value(x, 0.9).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn validation_collects_every_error() {
        let mut p = ProblemSpec::manufactured_poisson([0.0, 0.0, 1.0, 1.0], ScalarField::Constant(1.0));
        p.boundary.remove(&2);
        p.boundary.insert(7, BoundaryCondition::Dirichlet(BcData::Exact));
        p.exact = None;
        let errs = p.validate().unwrap_err();
        assert_eq!(errs.len(), 3, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("segment 2")));
    }

    #[test]
    fn nonlinear_bc_derivative_check() {
        let law = PowerLaw { coefficient: 1.0, exponent: 4.0 };
        let bc = NonlinearBc::new(law, BcData::Field(ScalarField::Constant(10.0))).unwrap();
        assert_eq!(bc.law.value(2.0), 16.0);
        assert_eq!(bc.law.derivative(2.0), 32.0);
        assert!(NonlinearBc::new(PowerLaw { coefficient: 0.0, exponent: 4.0 }, BcData::Exact).is_err());
    }

    #[test]
    fn spd_check() {
        assert!(is_spd([[2.0, 0.5], [0.5, 1.0]]));
        assert!(!is_spd([[1.0, 2.0], [2.0, 1.0]]));
        assert!(!is_spd([[1.0, 0.5], [0.0, 1.0]]));
    }

    #[test]
    fn domain_geometry() {
        let d = Domain::Rectangle([0.0, 0.0, 2.0, 1.0]);
        assert_eq!(d.area(), 2.0);
        let tri = Domain::Polygon(alloc::vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(tri.num_segments(), 3);
        assert_eq!(tri.area(), 0.5);
    }
}
