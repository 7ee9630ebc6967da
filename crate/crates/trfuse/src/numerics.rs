//! Numerical kernels: conjugate gradients on matrix-shaped unknowns and
//! SVD-based singular value thresholding.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tensor::{mat_fro_norm, mat_inner, Matrix};

/// Symmetric positive semidefinite operator acting on matrix-shaped unknowns.
///
/// Symmetry and positive semidefiniteness are contracts on the implementor,
/// checked by probe tests rather than encoded in the type.
pub trait LinearOperator {
    fn apply(&self, m: &Matrix) -> Matrix;
}

#[derive(Debug, Clone, Copy)]
pub struct CGConfig {
    /// Relative residual threshold against the right-hand side norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CGConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CGOutcome {
    pub x: Matrix,
    /// Final residual norm `||op(x) - rhs||_F` (recursively updated).
    pub residual: f64,
    /// Iterations taken; equal to `max_iter` when the tolerance was not met.
    pub iters: usize,
}

/// Conjugate gradients with Frobenius inner products, warm-started at `x0`.
pub fn cg_solve(
    op: &dyn LinearOperator,
    rhs: &Matrix,
    x0: &Matrix,
    cfg: &CGConfig,
) -> Result<CGOutcome> {
    cg_solve_impl(op, rhs, x0, cfg, None)
}

/// Same as [`cg_solve`] but records the residual norm after every iteration.
pub fn cg_solve_traced(
    op: &dyn LinearOperator,
    rhs: &Matrix,
    x0: &Matrix,
    cfg: &CGConfig,
) -> Result<(CGOutcome, Vec<f64>)> {
    let mut trace = Vec::new();
    let out = cg_solve_impl(op, rhs, x0, cfg, Some(&mut trace))?;
    Ok((out, trace))
}

fn cg_solve_impl(
    op: &dyn LinearOperator,
    rhs: &Matrix,
    x0: &Matrix,
    cfg: &CGConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<CGOutcome> {
    if rhs.dim() != x0.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cg rhs {:?} vs x0 {:?}",
            rhs.dim(),
            x0.dim()
        )));
    }
    let rhs_norm = mat_fro_norm(rhs);
    if rhs_norm == 0.0 {
        return Ok(CGOutcome {
            x: Array2::zeros(rhs.dim()),
            residual: 0.0,
            iters: 0,
        });
    }
    let mut x = x0.clone();
    let mut r = rhs - &op.apply(&x);
    let mut rr = mat_inner(&r, &r);
    check_finite(rr, 0)?;
    if let Some(t) = trace.as_deref_mut() {
        t.push(rr.sqrt());
    }
    if rr.sqrt() <= cfg.tol * rhs_norm {
        return Ok(CGOutcome {
            x,
            residual: rr.sqrt(),
            iters: 0,
        });
    }
    let mut p = r.clone();
    for k in 1..=cfg.max_iter {
        let ap = op.apply(&p);
        let pap = mat_inner(&p, &ap);
        check_finite(pap, k)?;
        if pap <= 0.0 {
            // roundoff on a singular-but-consistent system stalls with a
            // tiny curvature; a clearly negative one means a broken operator
            let scale = mat_fro_norm(&p) * mat_fro_norm(&ap);
            if pap < -1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Numerical(format!(
                    "cg curvature {pap:.3e} negative at iteration {k}: operator not PSD"
                )));
            }
            return Ok(CGOutcome {
                x,
                residual: rr.sqrt(),
                iters: k,
            });
        }
        let alpha = rr / pap;
        x = &x + &(alpha * &p);
        r = &r - &(alpha * &ap);
        let rr_new = mat_inner(&r, &r);
        check_finite(rr_new, k)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(rr_new.sqrt());
        }
        if rr_new.sqrt() <= cfg.tol * rhs_norm {
            return Ok(CGOutcome {
                x,
                residual: rr_new.sqrt(),
                iters: k,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p = &r + &(beta * &p);
    }
    Ok(CGOutcome {
        x,
        residual: rr.sqrt(),
        iters: cfg.max_iter,
    })
}

fn check_finite(v: f64, iter: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "non-finite value in cg iterate at iteration {iter}"
        )))
    }
}

/// Thin SVD `m = u * diag(s) * v^T` with `s` sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

/// Thin SVD via one-sided Jacobi rotations.
///
/// Column rotations are applied until all pairwise inner products vanish
/// relative to the column norms; singular values are the final column norms.
pub fn svd_thin(m: &Matrix) -> Result<Svd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("svd input contains non-finite entries".into()));
    }
    if m.nrows() >= m.ncols() {
        jacobi_svd_tall(m)
    } else {
        let t = jacobi_svd_tall(&m.t().to_owned())?;
        Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

fn jacobi_svd_tall(m: &Matrix) -> Result<Svd> {
    let (rows, cols) = m.dim();
    let mut a = m.clone();
    let mut v = Matrix::eye(cols);
    let eps = 1e-15;
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..cols.saturating_sub(1) {
            for q in p + 1..cols {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for r in 0..rows {
                    let x = a[[r, p]];
                    let y = a[[r, q]];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let x = a[[r, p]];
                    let y = a[[r, q]];
                    a[[r, p]] = c * x - s * y;
                    a[[r, q]] = s * x + c * y;
                }
                for r in 0..cols {
                    let x = v[[r, p]];
                    let y = v[[r, q]];
                    v[[r, p]] = c * x - s * y;
                    v[[r, q]] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    // singular values are column norms; normalize U and sort descending
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|r| a[[r, j]] * a[[r, j]]).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut u = Matrix::zeros((rows, cols));
    let mut vs = Matrix::zeros((cols, cols));
    let mut s = Vec::with_capacity(cols);
    let s_max = order.first().map(|&j| norms[j]).unwrap_or(0.0);
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        if norms[j] > s_max * 1e-300 && norms[j] > 0.0 {
            for r in 0..rows {
                u[[r, k]] = a[[r, j]] / norms[j];
            }
        }
        for r in 0..cols {
            vs[[r, k]] = v[[r, j]];
        }
    }
    complete_zero_columns(&mut u, &s, s_max);
    Ok(Svd { u, s, v: vs })
}

/// Fills U columns belonging to (numerically) zero singular values with an
/// orthonormal completion so the orthonormality contract holds at any rank.
fn complete_zero_columns(u: &mut Matrix, s: &[f64], s_max: f64) {
    let (rows, cols) = u.dim();
    let tol = s_max * 1e-300;
    for k in 0..cols {
        if s[k] > tol && s[k] > 0.0 {
            continue;
        }
        // Gram-Schmidt a standard basis vector against the existing columns.
        'basis: for e in 0..rows {
            let mut cand = vec![0.0; rows];
            cand[e] = 1.0;
            for j in 0..cols {
                if j == k || (s.get(j).copied().unwrap_or(0.0) <= tol && j > k) {
                    // skip self and not-yet-filled zero columns
                    if j == k {
                        continue;
                    }
                }
                let dot: f64 = (0..rows).map(|r| cand[r] * u[[r, j]]).sum();
                for (r, c) in cand.iter_mut().enumerate() {
                    *c -= dot * u[[r, j]];
                }
            }
            let norm: f64 = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for (r, c) in cand.iter().enumerate() {
                    u[[r, k]] = c / norm;
                }
                break 'basis;
            }
        }
    }
}

/// Singular value thresholding: soft-shrinks the singular values by `tau`.
pub fn svt(m: &Matrix, tau: f64) -> Result<Matrix> {
    if tau < 0.0 {
        return Err(Error::InvalidArgument(format!("svt threshold {tau} < 0")));
    }
    let Svd { u, s, v } = svd_thin(m)?;
    let k = s.len();
    let mut scaled = Matrix::zeros((u.nrows(), k));
    for j in 0..k {
        let shrunk = (s[j] - tau).max(0.0);
        if shrunk == 0.0 {
            continue;
        }
        for r in 0..u.nrows() {
            scaled[[r, j]] = u[[r, j]] * shrunk;
        }
    }
    Ok(scaled.dot(&v.t()))
}

/// Count of singular values above `tol` times the largest one.
pub fn numeric_rank(m: &Matrix, tol: f64) -> Result<usize> {
    let s = svd_thin(m)?.s;
    let s_max = s.first().copied().unwrap_or(0.0);
    if s_max == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol * s_max).count())
}

/// Sum of singular values.
pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(svd_thin(m)?.s.iter().sum())
}
