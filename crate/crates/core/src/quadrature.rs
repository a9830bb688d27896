//! Gaussian quadrature on the reference triangle and on `[-1, 1]`.

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;
use crate::mesh::{BoundaryEdge, Mesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceDomain {
    /// `(0,0), (1,0), (0,1)`, measure 1/2.
    Triangle,
    /// `[-1, 1]`, measure 2. Only the first coordinate of each point is used.
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    pub domain: ReferenceDomain,
    pub points: &'static [[f64; 2]],
    pub weights: &'static [f64],
    /// Highest total polynomial degree integrated exactly.
    pub degree: u32,
}

const TRI1_P: [[f64; 2]; 1] = [[1.0 / 3.0, 1.0 / 3.0]];
const TRI1_W: [f64; 1] = [0.5];

const TRI2_P: [[f64; 2]; 3] = [
    [1.0 / 6.0, 1.0 / 6.0],
    [2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0],
];
const TRI2_W: [f64; 3] = [1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];

// Strang-Fix / Dunavant six-point rule.
const TRI4_A: f64 = 0.445_948_490_915_964_886_318_329_253_883_05;
const TRI4_B: f64 = 0.091_576_213_509_770_743_459_571_463_402_202;
const TRI4_WA: f64 = 0.223_381_589_678_011_465_695_007_008_433_12 / 2.0;
const TRI4_WB: f64 = 0.109_951_743_655_321_867_638_326_324_900_21 / 2.0;
const TRI4_P: [[f64; 2]; 6] = [
    [TRI4_A, TRI4_A],
    [1.0 - 2.0 * TRI4_A, TRI4_A],
    [TRI4_A, 1.0 - 2.0 * TRI4_A],
    [TRI4_B, TRI4_B],
    [1.0 - 2.0 * TRI4_B, TRI4_B],
    [TRI4_B, 1.0 - 2.0 * TRI4_B],
];
const TRI4_W: [f64; 6] = [TRI4_WA, TRI4_WA, TRI4_WA, TRI4_WB, TRI4_WB, TRI4_WB];

const GL1_P: [[f64; 2]; 1] = [[0.0, 0.0]];
const GL1_W: [f64; 1] = [2.0];
const GL2_X: f64 = 0.577_350_269_189_625_764_509_148_780_501_96;
const GL2_P: [[f64; 2]; 2] = [[-GL2_X, 0.0], [GL2_X, 0.0]];
const GL2_W: [f64; 2] = [1.0, 1.0];
const GL3_X: f64 = 0.774_596_669_241_483_377_035_853_079_956_48;
const GL3_P: [[f64; 2]; 3] = [[-GL3_X, 0.0], [0.0, 0.0], [GL3_X, 0.0]];
const GL3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
const GL4_X1: f64 = 0.339_981_043_584_856_264_802_665_759_103_24;
const GL4_X2: f64 = 0.861_136_311_594_052_575_223_946_488_892_81;
const GL4_W1: f64 = 0.652_145_154_862_546_142_626_936_050_778_00;
const GL4_W2: f64 = 0.347_854_845_137_453_857_373_063_949_222_00;
const GL4_P: [[f64; 2]; 4] = [[-GL4_X2, 0.0], [-GL4_X1, 0.0], [GL4_X1, 0.0], [GL4_X2, 0.0]];
const GL4_W: [f64; 4] = [GL4_W2, GL4_W1, GL4_W1, GL4_W2];

impl QuadratureRule {
    /// Triangle rule exact for the requested degree: 1-point (degree 1),
    /// 3-point (degree 2) or 6-point (degree 3 and 4).
    pub fn triangle(degree: u32) -> Result<QuadratureRule> {
        let (points, weights, degree): (&'static [[f64; 2]], &'static [f64], u32) = match degree {
            0 | 1 => (&TRI1_P, &TRI1_W, 1),
            2 => (&TRI2_P, &TRI2_W, 2),
            3 | 4 => (&TRI4_P, &TRI4_W, 4),
            d => {
                return Err(Error::Config(alloc::format!(
                    "no triangle rule of degree {d} (max 4)"
                )))
            }
        };
        Ok(QuadratureRule {
            domain: ReferenceDomain::Triangle,
            points,
            weights,
            degree,
        })
    }

    /// Gauss-Legendre rule with `n` points (1 to 4), exact to degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
        let (points, weights): (&'static [[f64; 2]], &'static [f64]) = match n {
            1 => (&GL1_P, &GL1_W),
            2 => (&GL2_P, &GL2_W),
            3 => (&GL3_P, &GL3_W),
            4 => (&GL4_P, &GL4_W),
            _ => {
                return Err(Error::Config(alloc::format!(
                    "Gauss-Legendre rules have 1 to 4 points, requested {n}"
                )))
            }
        };
        Ok(QuadratureRule {
            domain: ReferenceDomain::Segment,
            points,
            weights,
            degree: 2 * n as u32 - 1,
        })
    }

    /// Degree-2 triangle rule used by default for P1 assembly.
    pub fn default_triangle() -> QuadratureRule {
        QuadratureRule::triangle(2).expect("built-in rule")
    }

    pub fn default_segment() -> QuadratureRule {
        QuadratureRule::gauss_legendre(2).expect("built-in rule")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Quadrature points mapped onto `element` with weights scaled by the
    /// Jacobian determinant.
    pub fn element_points(
        &self,
        mesh: &Mesh,
        element: usize,
    ) -> Result<impl Iterator<Item = ([f64; 2], [f64; 3], f64)> + '_> {
        self.expect(ReferenceDomain::Triangle)?;
        mesh.element(element)?;
        let [p0, p1, p2] = mesh.vertices(element);
        let jac = 2.0 * mesh.area(element);
        Ok(self.points.iter().zip(self.weights).map(move |(&[s, t], &w)| {
            let l = [1.0 - s - t, s, t];
            let x = l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0];
            let y = l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1];
            ([x, y], l, w * jac)
        }))
    }

    /// Points on the straight segment `a -> b`, with the local arc-length
    /// coordinate of each point and the weight scaled by `|b - a| / 2`.
    pub fn segment_points(
        &self,
        a: [f64; 2],
        b: [f64; 2],
    ) -> Result<impl Iterator<Item = ([f64; 2], f64, f64)> + '_> {
        self.expect(ReferenceDomain::Segment)?;
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        Ok(self.points.iter().zip(self.weights).map(move |(&[xi, _], &w)| {
            let t = 0.5 * (1.0 + xi);
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            (p, t * len, w * 0.5 * len)
        }))
    }

    fn expect(&self, domain: ReferenceDomain) -> Result<()> {
        if self.domain == domain {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!(
                "expected a {domain:?} rule, got a {:?} rule",
                self.domain
            )))
        }
    }
}

/// `sum_j w_j f(x_j) |J|` over the mapped points of `element`.
pub fn integrate_on_element(
    rule: &QuadratureRule,
    mesh: &Mesh,
    element: usize,
    integrand: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for ([x, y], _, w) in rule.element_points(mesh, element)? {
        let v = integrand(x, y);
        if !v.is_finite() {
            return Err(Error::NonFinite { x, y });
        }
        sum += w * v;
    }
    Ok(sum)
}

/// Integral of `integrand(x, y)` along a mesh boundary edge.
pub fn integrate_on_edge(
    rule: &QuadratureRule,
    mesh: &Mesh,
    edge: &BoundaryEdge,
    integrand: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    integrate_on_segment(rule, mesh.point(edge.nodes[0]), mesh.point(edge.nodes[1]), integrand)
}

pub fn integrate_on_segment(
    rule: &QuadratureRule,
    a: [f64; 2],
    b: [f64; 2],
    integrand: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for ([x, y], _, w) in rule.segment_points(a, b)? {
        let v = integrand(x, y);
        if !v.is_finite() {
            return Err(Error::NonFinite { x, y });
        }
        sum += w * v;
    }
    Ok(sum)
}
