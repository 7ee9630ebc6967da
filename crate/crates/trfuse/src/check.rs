//! Fast invariant self-test behind the `check` CLI command.
//!
//! Each check re-derives its expectation independently of the code path it
//! probes (dense solves for CG, direct objective evaluation for SVT, both
//! sides of the factorization identities).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::degradation::{degrade, equal_band_groups, DegradationModel};
use crate::error::Result;
use crate::numerics::{cg_solve, nuclear_norm, svt, CGConfig, LinearOperator};
use crate::ring::{merge_cores, rank_bound_check, tr_init, tr_reconstruct, TRCores};
use crate::tensor::{fold_n, kron, mat_fro_norm, mat_inner, DenseTensor, Matrix};

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub passed: Vec<String>,
    pub failed: Vec<String>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Runs the invariant suite. `corrupt_unfolding` deliberately breaks the
/// factorization-identity comparison (negative control for the harness).
pub fn run_self_checks(corrupt_unfolding: bool) -> Result<CheckReport> {
    let mut report = CheckReport {
        passed: Vec::new(),
        failed: Vec::new(),
    };
    let record = |name: &str, ok: bool, report: &mut CheckReport| {
        if ok {
            report.passed.push(name.to_string());
        } else {
            report.failed.push(name.to_string());
        }
    };

    record(
        "unfold/fold round-trip",
        check_round_trip()?,
        &mut report,
    );
    record(
        "block factorization identity",
        check_factorization_identity(corrupt_unfolding)?,
        &mut report,
    );
    record(
        "cyclic shift invariance",
        check_shift_invariance()?,
        &mut report,
    );
    record("core rank bound", check_rank_bound()?, &mut report);
    record("cg vs dense solve", check_cg_oracle()?, &mut report);
    record("svt proximal optimality", check_svt_oracle()?, &mut report);
    record(
        "coupled degradation consistency",
        check_degradation_consistency()?,
        &mut report,
    );
    Ok(report)
}

fn check_round_trip() -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let t = DenseTensor::from_fn(vec![3, 4, 2, 3], |_| rng.gen_range(-1.0..1.0))?;
    for n in 1..=4 {
        let back = fold_n(&t.mode_n_unfold(n)?, t.shape(), n)?;
        if back != t {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_factorization_identity(corrupt: bool) -> Result<bool> {
    for seed in 0..5u64 {
        let ring = tr_init(&[3, 4, 2], &[2, 3, 2], 200 + seed)?;
        let full = tr_reconstruct(&ring)?;
        for split in 1..3 {
            let left = merge_cores(&ring, 1, split)?;
            let right = merge_cores(&ring, split + 1, 3)?;
            let mut right_unf = right.tr_unfold(2)?;
            if corrupt && right_unf.ncols() >= 2 {
                // swap two coefficient columns: simulates a transposed
                // interleaving convention
                let tmp = right_unf.column(0).to_owned();
                let second = right_unf.column(1).to_owned();
                right_unf.column_mut(0).assign(&second);
                right_unf.column_mut(1).assign(&tmp);
            }
            let lhs = left.mode_n_unfold(2)?.dot(&right_unf.t());
            let rhs = full.block_unfold(split)?;
            let err = mat_fro_norm(&(&lhs - &rhs)) / mat_fro_norm(&rhs).max(1e-300);
            if err > 1e-10 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn check_shift_invariance() -> Result<bool> {
    let ring = tr_init(&[3, 2, 4], &[2, 2, 3], 300)?;
    let full = tr_reconstruct(&ring)?;
    for k in 0..3 {
        let rotated = tr_reconstruct(&ring.rotate(k))?;
        let shifted = full.circ_shift(k)?;
        let err = rotated.sub(&shifted)?.fro_norm() / full.fro_norm();
        if err > 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_rank_bound() -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for trial in 0..10u64 {
        let order = if trial % 2 == 0 { 3 } else { 4 };
        let shape: Vec<usize> = (0..order).map(|_| rng.gen_range(2..=5)).collect();
        let ranks: Vec<usize> = (0..order).map(|_| rng.gen_range(1..=3)).collect();
        let ring = tr_init(&shape, &ranks, 400 + trial)?;
        for n in 1..=order {
            if !rank_bound_check(&ring, n, 1e-9)?.holds {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

struct SylvesterOp {
    s: Matrix,
    ga: Matrix,
    gb: Matrix,
}

impl LinearOperator for SylvesterOp {
    fn apply(&self, x: &Matrix) -> Matrix {
        self.s.dot(x).dot(&self.ga) + x.dot(&self.gb)
    }
}

/// Column-major vectorization paired with the standard Kronecker identity
/// `vec(S X G) = (G^T (x) S) vec(X)`.
fn vec_cols(x: &Matrix) -> Vec<f64> {
    let (r, c) = x.dim();
    let mut v = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            v.push(x[[i, j]]);
        }
    }
    v
}

fn unvec_cols(v: &[f64], rows: usize, cols: usize) -> Matrix {
    Matrix::from_shape_fn((rows, cols), |(i, j)| v[j * rows + i])
}

/// Gaussian elimination with partial pivoting; the small dense oracle.
fn dense_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[[i, col]].abs().partial_cmp(&m[[j, col]].abs()).unwrap()
        })?;
        if m[[pivot, col]].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                let tmp = m[[col, k]];
                m[[col, k]] = m[[pivot, k]];
                m[[pivot, k]] = tmp;
            }
            rhs.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = m[[row, col]] / m[[col, col]];
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[[row, k]] * x[k];
        }
        x[row] = acc / m[[row, row]];
    }
    Some(x)
}

fn check_cg_oracle() -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..5 {
        let spd = |n: usize, rng: &mut ChaCha8Rng| {
            let a = Matrix::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
            a.t().dot(&a) + Matrix::eye(n) * 0.3
        };
        let s = spd(4, &mut rng);
        let ga = spd(3, &mut rng);
        let gb = spd(3, &mut rng);
        let rhs = Matrix::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        let op = SylvesterOp {
            s: s.clone(),
            ga: ga.clone(),
            gb: gb.clone(),
        };
        let out = cg_solve(&op, &rhs, &Matrix::zeros((4, 3)), &CGConfig::default())?;
        // independent route: materialize the Kronecker system and solve it
        // (the gram factors are symmetric, so no transpose is needed)
        let big = kron(&ga, &s) + kron(&gb, &Matrix::eye(4));
        let Some(direct) = dense_solve(&big, &vec_cols(&rhs)) else {
            return Ok(false);
        };
        let direct = unvec_cols(&direct, 4, 3);
        let err = mat_fro_norm(&(&out.x - &direct)) / mat_fro_norm(&direct).max(1e-300);
        if err > 1e-6 {
            return Ok(false);
        }
        let resid = mat_fro_norm(&(&op.apply(&out.x) - &rhs)) / mat_fro_norm(&rhs);
        if resid > 1e-6 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_svt_oracle() -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..3 {
        let m = Matrix::from_shape_fn((6, 4), |_| rng.gen_range(-1.0..1.0));
        let tau = rng.gen_range(0.1..0.8);
        let star = svt(&m, tau)?;
        let objective = |x: &Matrix| -> Result<f64> {
            let diff = x - &m;
            Ok(tau * nuclear_norm(x)? + 0.5 * mat_inner(&diff, &diff))
        };
        let f_star = objective(&star)?;
        for _ in 0..60 {
            let pert = Matrix::from_shape_fn((6, 4), |_| rng.gen_range(-0.05..0.05));
            if objective(&(&star + &pert))? < f_star - 1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn check_degradation_consistency() -> Result<bool> {
    let ring = tr_init(&[8, 8, 6], &[2, 4, 2], 106)?;
    let x = tr_reconstruct(&ring)?;
    let model = DegradationModel::build(8, 8, 6, 2, 4, equal_band_groups(6, 2)?)?;
    let (y, z) = degrade(&x, &model)?;
    let y_cores = tr_reconstruct(&TRCores::new(vec![
        ring.cores()[0].mode2_ttm(&model.p1)?,
        ring.cores()[1].mode2_ttm(&model.p2)?,
        ring.cores()[2].clone(),
    ])?)?;
    let z_cores = tr_reconstruct(&TRCores::new(vec![
        ring.cores()[0].clone(),
        ring.cores()[1].clone(),
        ring.cores()[2].mode2_ttm(&model.p3)?,
    ])?)?;
    Ok(y.sub(&y_cores)?.fro_norm() / y.fro_norm() < 1e-10
        && z.sub(&z_cores)?.fro_norm() / z.fro_norm() < 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes_all_checks() {
        let report = run_self_checks(false).unwrap();
        assert!(report.all_passed(), "failed: {:?}", report.failed);
        assert_eq!(report.passed.len(), 7);
    }

    #[test]
    fn corrupted_unfolding_is_caught() {
        let report = run_self_checks(true).unwrap();
        assert!(report
            .failed
            .iter()
            .any(|name| name.contains("factorization identity")));
    }
}
