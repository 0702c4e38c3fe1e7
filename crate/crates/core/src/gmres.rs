//! Restarted GMRES with modified Gram–Schmidt and one reorthogonalization
//! pass.

use crate::kernels::C64;
use crate::operator::{LinearOperator, OperatorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub restart: usize,
    /// relative residual target
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 30,
            tol: 1e-12,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmresStatus {
    Converged,
    MaxIterations,
    /// The Krylov space became invariant without reaching the tolerance.
    Breakdown,
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<C64>,
    pub status: GmresStatus,
    pub iterations: usize,
    /// relative residual estimate after every iteration, starting with 1
    pub history: Vec<f64>,
    /// true relative residual of the returned iterate
    pub residual: f64,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn residual(op: &dyn LinearOperator, b: &[C64], x: &[C64]) -> Vec<C64> {
    let mut r = vec![C64::new(0.0, 0.0); b.len()];
    op.apply_into(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    r
}

/// Solves `A x = b` from the zero initial guess.
pub fn gmres(op: &dyn LinearOperator, b: &[C64], cfg: &GmresConfig) -> Result<GmresResult, OperatorError> {
    gmres_preconditioned(op, None, b, cfg)
}

/// Flexible GMRES with the right preconditioner `P ≈ A⁻¹`: the residual
/// being minimized is still `b − A x`. `P` may itself be an inexact
/// iterative solve.
pub fn gmres_preconditioned(
    op: &dyn LinearOperator,
    prec: Option<&dyn LinearOperator>,
    b: &[C64],
    cfg: &GmresConfig,
) -> Result<GmresResult, OperatorError> {
    let n = b.len();
    if op.nrows() != n || op.ncols() != n || prec.is_some_and(|p| p.nrows() != n || p.ncols() != n) {
        return Err(OperatorError::DimensionMismatch {
            rows: op.nrows(),
            cols: op.ncols(),
            len: n,
        });
    }
    let zero = C64::new(0.0, 0.0);
    let bnorm = norm(b);
    let mut x = vec![zero; n];
    let mut history = vec![1.0];
    if bnorm == 0.0 {
        return Ok(GmresResult {
            x,
            status: GmresStatus::Converged,
            iterations: 0,
            history,
            residual: 0.0,
        });
    }
    let m = cfg.restart.max(1);
    let mut iterations = 0;
    let mut status = GmresStatus::MaxIterations;
    'outer: while iterations < cfg.max_iter {
        let r = residual(op, b, &x);
        let beta = norm(&r);
        if beta / bnorm <= cfg.tol {
            status = GmresStatus::Converged;
            break;
        }
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|v| v / beta).collect()];
        // Hessenberg columns after rotation, rotations and rhs
        let mut hcols: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<C64> = Vec::with_capacity(m);
        let mut g = vec![zero; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut zs: Vec<Vec<C64>> = Vec::new();
        let mut k_done = 0;
        let mut breakdown = false;
        for k in 0..m {
            if iterations >= cfg.max_iter {
                break;
            }
            let mut w = vec![zero; n];
            match prec {
                Some(p) => {
                    let mut z = vec![zero; n];
                    p.apply_into(&basis[k], &mut z);
                    op.apply_into(&z, &mut w);
                    zs.push(z);
                }
                None => op.apply_into(&basis[k], &mut w),
            }
            let mut h = vec![zero; k + 2];
            for _pass in 0..2 {
                for (j, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    h[j] += c;
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let hn = norm(&w);
            h[k + 1] = C64::new(hn, 0.0);
            for j in 0..k {
                let t = cs[j] * h[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j].conj() * h[j] + cs[j] * h[j + 1];
                h[j] = t;
            }
            // new rotation zeroing h[k+1]
            let (a, bb) = (h[k], h[k + 1]);
            let rho = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if rho == 0.0 {
                (1.0, zero)
            } else if a.norm() == 0.0 {
                (0.0, bb.conj() / bb.norm())
            } else {
                let c = a.norm() / rho;
                (c, a / a.norm() * bb.conj() / rho)
            };
            h[k] = c * a + s * bb;
            h[k + 1] = zero;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            cs.push(c);
            sn.push(s);
            hcols.push(h);
            iterations += 1;
            k_done = k + 1;
            let rel = g[k + 1].norm() / bnorm;
            history.push(rel);
            if rel <= cfg.tol {
                break;
            }
            if hn <= 1e-14 * beta {
                breakdown = true;
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution
        let mut y = vec![zero; k_done];
        for i in (0..k_done).rev() {
            let mut s = g[i];
            for j in i + 1..k_done {
                s -= hcols[j][i] * y[j];
            }
            y[i] = if hcols[i][i].norm() > 0.0 { s / hcols[i][i] } else { zero };
        }
        let dirs = if prec.is_some() { &zs } else { &basis };
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&dirs[j]).for_each(|(xi, vi)| *xi += yj * vi);
        }
        if breakdown {
            let rel = norm(&residual(op, b, &x)) / bnorm;
            status = if rel <= cfg.tol { GmresStatus::Converged } else { GmresStatus::Breakdown };
            break 'outer;
        }
        if history.last().is_some_and(|&r| r <= cfg.tol) {
            // confirm with the true residual; restart if rounding misled us
            let rel = norm(&residual(op, b, &x)) / bnorm;
            if rel <= cfg.tol * 10.0 {
                status = GmresStatus::Converged;
                break;
            }
        }
    }
    let res = norm(&residual(op, b, &x)) / bnorm;
    Ok(GmresResult {
        x,
        status,
        iterations,
        history,
        residual: res,
    })
}
