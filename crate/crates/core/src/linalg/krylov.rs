#[allow(unused_imports)] // shadowed by inherent methods when `std` is linked
use num_traits::Float;
use alloc::vec::Vec;

use super::{axpy, check_system, dot, norm2, residual, LinearOperator, SolveStats};
use crate::{Error, Result};

pub const DEFAULT_RESTART: usize = 30;

fn zero_rhs(n: usize) -> (Vec<f64>, SolveStats) {
    (
        alloc::vec![0.0; n],
        SolveStats {
            iterations: 0,
            final_residual_norm: 0.0,
            converged: true,
            history: Vec::new(),
        },
    )
}

/// Restarted GMRES(m) with modified Gram-Schmidt and Givens rotations.
///
/// `max_iter` bounds the total number of Arnoldi steps over all cycles.
/// A zero Arnoldi norm ends the cycle early; if the residual is still above
/// `tol` at that point the Krylov space cannot contain the solution and
/// [`Error::Breakdown`] is returned.
pub fn gmres(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    check_system(a, b, x0, tol)?;
    if restart == 0 {
        return Err(Error::Config("GMRES restart must be at least 1".into()));
    }
    let n = a.dim();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(zero_rhs(n));
    }

    let mut x = x0.to_vec();
    let mut r = residual(a, b, &x);
    let mut beta = norm2(&r);
    let mut history = alloc::vec![beta / bnorm];
    let mut total = 0usize;
    let mut w = alloc::vec![0.0; n];

    loop {
        let rel = beta / bnorm;
        if rel <= tol || total >= max_iter {
            return Ok((
                x,
                SolveStats {
                    iterations: total,
                    final_residual_norm: rel,
                    converged: rel <= tol,
                    history,
                },
            ));
        }

        let m = restart.min(max_iter - total);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Column-major upper Hessenberg, reduced in place to triangular form.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = alloc::vec![0.0; m + 1];
        g[0] = beta;
        let mut breakdown = false;

        for j in 0..m {
            a.apply(&basis[j], &mut w);
            let w_norm0 = norm2(&w);
            let mut col = alloc::vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                axpy(&mut w, -hij, v);
            }
            let h_next = norm2(&w);
            col[j + 1] = h_next;

            for i in 0..j {
                let (c, s) = (cs[i], sn[i]);
                let t = c * col[i] + s * col[i + 1];
                col[i + 1] = -s * col[i] + c * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(col[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[j] / denom, col[j + 1] / denom) };
            col[j] = c * col[j] + s * col[j + 1];
            col[j + 1] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            cs.push(c);
            sn.push(s);
            h.push(col);
            total += 1;

            if h_next <= 1e-14 * w_norm0 || h_next == 0.0 {
                breakdown = true;
                break;
            }
            if g[j + 1].abs() / bnorm <= tol {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        let k = h.len();
        let mut y = alloc::vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for jj in i + 1..k {
                s -= h[jj][i] * y[jj];
            }
            if h[i][i] == 0.0 {
                return Err(Error::Breakdown {
                    solver: "gmres",
                    iteration: total,
                });
            }
            y[i] = s / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(&mut x, *yi, v);
        }

        r = residual(a, b, &x);
        beta = norm2(&r);
        history.push(beta / bnorm);
        if breakdown && beta / bnorm > tol {
            return Err(Error::Breakdown {
                solver: "gmres",
                iteration: total,
            });
        }
    }
}

/// Stabilised bi-conjugate gradients (van der Vorst).
///
/// When the recurred residual reaches `tol` the true residual is checked;
/// if it disagrees the iteration restarts from the true residual.
pub fn bicgstab(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    check_system(a, b, x0, tol)?;
    let n = a.dim();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(zero_rhs(n));
    }

    let mut x = x0.to_vec();
    let mut r = residual(a, b, &x);
    let mut history = alloc::vec![norm2(&r) / bnorm];
    if history[0] <= tol {
        let rel = history[0];
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                final_residual_norm: rel,
                converged: true,
                history,
            },
        ));
    }

    let mut r_hat = r.clone();
    let (mut rho_prev, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = alloc::vec![0.0; n];
    let mut p = alloc::vec![0.0; n];
    let mut s = alloc::vec![0.0; n];
    let mut t = alloc::vec![0.0; n];

    for it in 1..=max_iter {
        let rho = dot(&r_hat, &r);
        if rho.abs() <= 1e-300 || rho.abs() <= 1e-30 * norm2(&r_hat) * norm2(&r) {
            return Err(Error::Breakdown {
                solver: "bicgstab",
                iteration: it,
            });
        }
        let beta = (rho / rho_prev) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        a.apply(&p, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(Error::Breakdown {
                solver: "bicgstab",
                iteration: it,
            });
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }

        let mut apparent = false;
        if norm2(&s) / bnorm <= tol {
            axpy(&mut x, alpha, &p);
            apparent = true;
        } else {
            a.apply(&s, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            if omega == 0.0 {
                return Err(Error::Breakdown {
                    solver: "bicgstab",
                    iteration: it,
                });
            }
            for i in 0..n {
                x[i] += alpha * p[i] + omega * s[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm2(&r) / bnorm <= tol {
                apparent = true;
            }
        }
        rho_prev = rho;

        if apparent {
            r = residual(a, b, &x);
            let rel = norm2(&r) / bnorm;
            history.push(rel);
            if rel <= tol {
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        final_residual_norm: rel,
                        converged: true,
                        history,
                    },
                ));
            }
            r_hat = r.clone();
            rho_prev = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
        } else {
            history.push(norm2(&r) / bnorm);
        }
    }

    let rel = norm2(&residual(a, b, &x)) / bnorm;
    Ok((
        x,
        SolveStats {
            iterations: max_iter,
            final_residual_norm: rel,
            converged: rel <= tol,
            history,
        },
    ))
}

/// Conjugate gradients for symmetric positive definite `A`.
///
/// Convergence of the recurred residual is confirmed against the true
/// residual; on disagreement the iteration restarts from the true residual,
/// and stops once a restart no longer improves it.
pub fn conjugate_gradient(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    check_system(a, b, x0, tol)?;
    let n = a.dim();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(zero_rhs(n));
    }
    let mut x = x0.to_vec();
    let mut r = residual(a, b, &x);
    let mut p = r.clone();
    let mut ap = alloc::vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut history = alloc::vec![rr.sqrt() / bnorm];
    let mut best_true = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        if rr.sqrt() / bnorm <= tol {
            r = residual(a, b, &x);
            let true_rel = norm2(&r) / bnorm;
            if true_rel <= tol || true_rel >= best_true {
                break;
            }
            best_true = true_rel;
            p.copy_from_slice(&r);
            rr = dot(&r, &r);
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown {
                solver: "cg",
                iteration: iterations + 1,
            });
        }
        let alpha = rr / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
        iterations += 1;
        history.push(rr.sqrt() / bnorm);
    }
    let rel = norm2(&residual(a, b, &x)) / bnorm;
    Ok((
        x,
        SolveStats {
            iterations,
            final_residual_norm: rel,
            converged: rel <= tol,
            history,
        },
    ))
}
