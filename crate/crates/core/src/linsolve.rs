//! Linear solvers for `diag(shift) - scale·Δ` with the Neumann Laplacian.
//!
//! One-dimensional systems are tridiagonal and solved directly; in two
//! dimensions a matrix-free conjugate gradient is used since the operator is
//! symmetric positive definite whenever every shift is positive.

use crate::error::{Error, Result};
use crate::grid::{laplacian_into, Grid};

/// Solves a tridiagonal system. `sub[0]` and `sup[n-1]` are ignored.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    if n == 0 || sub.len() != n || diag.len() != n || sup.len() != n {
        return Err(Error::InvalidArgument(
            "tridiagonal bands must match the right-hand side".into(),
        ));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 {
        return Err(Error::SingularPivot(0));
    }
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        if den == 0.0 || !den.is_finite() {
            return Err(Error::SingularPivot(i));
        }
        c[i] = sup[i] / den;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Conjugate gradient for an SPD operator given as `apply(x, out)`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats)> {
    let n = rhs.len();
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgStats {
                iterations: 0,
                rel_residual: 0.0,
            },
        ));
    }
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for it in 0..=max_iter {
        let res = rr.sqrt() / b_norm;
        if res <= tol {
            return Ok((
                x,
                CgStats {
                    iterations: it,
                    rel_residual: res,
                },
            ));
        }
        if it == max_iter {
            return Err(Error::LinearSolve {
                iterations: it,
                residual: res,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolve {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    unreachable!()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `(diag(shift) - scale·Δ) x = rhs`. `shift` must be positive.
pub fn solve_shifted_laplacian(
    grid: &Grid,
    shift: &[f64],
    scale: f64,
    rhs: &[f64],
    guess: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = grid.n_cells();
    debug_assert!(shift.len() == n && rhs.len() == n);
    if shift.iter().any(|&s| !(s > 0.0)) || !(scale >= 0.0) {
        return Err(Error::InvalidArgument(
            "shifted Laplacian needs positive shifts".into(),
        ));
    }
    if grid.dim() == 1 {
        let k = scale / (grid.spacing()[0] * grid.spacing()[0]);
        let mut sub = vec![-k; n];
        let mut sup = vec![-k; n];
        let mut diag: Vec<f64> = shift.iter().map(|s| s + 2.0 * k).collect();
        sub[0] = 0.0;
        sup[n - 1] = 0.0;
        diag[0] -= k;
        diag[n - 1] -= k;
        thomas(&sub, &diag, &sup, rhs)
    } else {
        let apply = |x: &[f64], out: &mut [f64]| {
            laplacian_into(grid, x, out);
            for i in 0..x.len() {
                out[i] = shift[i] * x[i] - scale * out[i];
            }
        };
        conjugate_gradient(apply, rhs, guess, tol, max_iter).map(|(x, _)| x)
    }
}
