//! Built-in analytic scalar fields on the plane.
//!
//! Each field knows its value, gradient and Hessian so it can serve as an
//! exact solution and produce a manufactured source term.

#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;
use core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    /// `a + b x + c y`
    Linear { a: f64, b: f64, c: f64 },
    /// `c[0] + c[1] x + c[2] y + c[3] x^2 + c[4] x y + c[5] y^2`
    Quadratic([f64; 6]),
    /// `amplitude * sin(k pi x) * sin(k pi y)` with `k = frequency`
    SinSin { amplitude: f64, frequency: f64 },
    /// `offset + amplitude * exp(-((x - x0)^2 + (y - y0)^2) / width^2)`
    Gaussian {
        amplitude: f64,
        x0: f64,
        y0: f64,
        width: f64,
        offset: f64,
    },
}

impl ScalarField {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            ScalarField::Constant(c) => c,
            ScalarField::Linear { a, b, c } => a + b * x + c * y,
            ScalarField::Quadratic(c) => {
                c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
            }
            ScalarField::SinSin { amplitude, frequency } => {
                let k = frequency * PI;
                amplitude * (k * x).sin() * (k * y).sin()
            }
            ScalarField::Gaussian { amplitude, x0, y0, width, offset } => {
                let r2 = (x - x0).powi(2) + (y - y0).powi(2);
                offset + amplitude * (-r2 / (width * width)).exp()
            }
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            ScalarField::Constant(_) => [0.0, 0.0],
            ScalarField::Linear { b, c, .. } => [b, c],
            ScalarField::Quadratic(c) => [c[1] + 2.0 * c[3] * x + c[4] * y, c[2] + c[4] * x + 2.0 * c[5] * y],
            ScalarField::SinSin { amplitude, frequency } => {
                let k = frequency * PI;
                [
                    amplitude * k * (k * x).cos() * (k * y).sin(),
                    amplitude * k * (k * x).sin() * (k * y).cos(),
                ]
            }
            ScalarField::Gaussian { amplitude, x0, y0, width, .. } => {
                let (dx, dy) = (x - x0, y - y0);
                let w2 = width * width;
                let g = amplitude * (-(dx * dx + dy * dy) / w2).exp();
                [-2.0 * dx / w2 * g, -2.0 * dy / w2 * g]
            }
        }
    }

    /// `[[u_xx, u_xy], [u_xy, u_yy]]`
    pub fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        match *self {
            ScalarField::Constant(_) | ScalarField::Linear { .. } => [[0.0; 2]; 2],
            ScalarField::Quadratic(c) => [[2.0 * c[3], c[4]], [c[4], 2.0 * c[5]]],
            ScalarField::SinSin { amplitude, frequency } => {
                let k = frequency * PI;
                let (sx, cx, sy, cy) = ((k * x).sin(), (k * x).cos(), (k * y).sin(), (k * y).cos());
                let k2 = amplitude * k * k;
                [[-k2 * sx * sy, k2 * cx * cy], [k2 * cx * cy, -k2 * sx * sy]]
            }
            ScalarField::Gaussian { amplitude, x0, y0, width, .. } => {
                let (dx, dy) = (x - x0, y - y0);
                let w2 = width * width;
                let g = amplitude * (-(dx * dx + dy * dy) / w2).exp();
                [
                    [(4.0 * dx * dx / (w2 * w2) - 2.0 / w2) * g, 4.0 * dx * dy / (w2 * w2) * g],
                    [4.0 * dx * dy / (w2 * w2) * g, (4.0 * dy * dy / (w2 * w2) - 2.0 / w2) * g],
                ]
            }
        }
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        let h = self.hessian(x, y);
        h[0][0] + h[1][1]
    }

    /// Whether the field is affine, i.e. reproduced exactly by P1 elements.
    pub fn is_affine(&self) -> bool {
        match *self {
            ScalarField::Constant(_) | ScalarField::Linear { .. } => true,
            ScalarField::Quadratic(c) => c[3] == 0.0 && c[4] == 0.0 && c[5] == 0.0,
            ScalarField::SinSin { amplitude, .. } | ScalarField::Gaussian { amplitude, .. } => amplitude == 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields() -> [ScalarField; 5] {
        [
            ScalarField::Constant(2.0),
            ScalarField::Linear { a: 1.0, b: -2.0, c: 0.5 },
            ScalarField::Quadratic([1.0, 2.0, 3.0, -1.0, 0.5, 2.0]),
            ScalarField::SinSin { amplitude: 1.5, frequency: 2.0 },
            ScalarField::Gaussian { amplitude: 2.0, x0: 0.3, y0: 0.6, width: 0.4, offset: 1.0 },
        ]
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for f in fields() {
            for &(x, y) in &[(0.1, 0.2), (0.45, 0.77), (0.9, 0.35)] {
                let g = f.gradient(x, y);
                let gx = (f.value(x + h, y) - f.value(x - h, y)) / (2.0 * h);
                let gy = (f.value(x, y + h) - f.value(x, y - h)) / (2.0 * h);
                assert!((g[0] - gx).abs() < 1e-7 * (1.0 + gx.abs()), "{f:?}");
                assert!((g[1] - gy).abs() < 1e-7 * (1.0 + gy.abs()), "{f:?}");
                let hs = f.hessian(x, y);
                let hxx = (f.gradient(x + h, y)[0] - f.gradient(x - h, y)[0]) / (2.0 * h);
                let hxy = (f.gradient(x, y + h)[0] - f.gradient(x, y - h)[0]) / (2.0 * h);
                let hyy = (f.gradient(x, y + h)[1] - f.gradient(x, y - h)[1]) / (2.0 * h);
                assert!((hs[0][0] - hxx).abs() < 1e-6 * (1.0 + hxx.abs()), "{f:?}");
                assert!((hs[0][1] - hxy).abs() < 1e-6 * (1.0 + hxy.abs()), "{f:?}");
                assert!((hs[1][1] - hyy).abs() < 1e-6 * (1.0 + hyy.abs()), "{f:?}");
            }
        }
    }

    #[test]
    fn affine_detection() {
        let [c, l, q, s, g] = fields();
        assert!(c.is_affine() && l.is_affine());
        assert!(!q.is_affine() && !s.is_affine() && !g.is_affine());
        assert!(ScalarField::Quadratic([1.0, 2.0, 3.0, 0.0, 0.0, 0.0]).is_affine());
    }
}
