//! Alternating optimizer for coupled tensor-ring fusion.
//!
//! One sweep updates the two spatial cores and the spectral core by solving
//! their Sylvester-type normal equations with warm-started conjugate
//! gradients; in nuclear-norm mode a sweep additionally refreshes the
//! auxiliary spectral core by singular value thresholding and advances the
//! Lagrange multiplier and penalty.

use crate::degradation::DegradationModel;
use crate::error::{Error, Result};
use crate::numerics::{cg_solve, nuclear_norm, svt, CGConfig, LinearOperator};
use crate::ring::{merge_pair, tr_init, tr_reconstruct, TRCores};
use crate::tensor::{fold_n, DenseTensor, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    Ctrf,
    Nctrf,
}

impl FusionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FusionMode::Ctrf => "ctrf",
            FusionMode::Nctrf => "nctrf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ctrf" => Ok(FusionMode::Ctrf),
            "nctrf" => Ok(FusionMode::Nctrf),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

/// Observed pair plus the degradation operators and the target ring ranks.
#[derive(Debug, Clone)]
pub struct FusionProblem {
    pub y: DenseTensor,
    pub z: DenseTensor,
    pub model: DegradationModel,
    pub ranks: (usize, usize, usize),
}

impl FusionProblem {
    pub fn new(
        y: DenseTensor,
        z: DenseTensor,
        model: DegradationModel,
        ranks: (usize, usize, usize),
    ) -> Result<Self> {
        if y.order() != 3 || z.order() != 3 {
            return Err(Error::ShapeMismatch(
                "observations must be order-3 tensors".into(),
            ));
        }
        let expect_y = [model.p1.nrows(), model.p2.nrows(), model.p3.ncols()];
        let expect_z = [model.p1.ncols(), model.p2.ncols(), model.p3.nrows()];
        if y.shape() != expect_y {
            return Err(Error::ShapeMismatch(format!(
                "hsi shape {:?}, operators imply {:?}",
                y.shape(),
                expect_y
            )));
        }
        if z.shape() != expect_z {
            return Err(Error::ShapeMismatch(format!(
                "msi shape {:?}, operators imply {:?}",
                z.shape(),
                expect_z
            )));
        }
        if ranks.0 == 0 || ranks.1 == 0 || ranks.2 == 0 {
            return Err(Error::InvalidArgument("ranks must be >= 1".into()));
        }
        Ok(Self { y, z, model, ranks })
    }

    /// Target high-resolution shape `(M, N, B)`.
    pub fn hr_shape(&self) -> [usize; 3] {
        [
            self.model.p1.ncols(),
            self.model.p2.ncols(),
            self.model.p3.ncols(),
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub mode: FusionMode,
    /// Nuclear-norm weight.
    pub lambda: f64,
    /// Penalty growth factor.
    pub rho: f64,
    /// Initial penalty.
    pub mu0: f64,
    /// Penalty cap.
    pub mu_max: f64,
    pub outer_iters: usize,
    pub cg: CGConfig,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: FusionMode::Nctrf,
            lambda: 0.001,
            rho: 1.5,
            mu0: 1e-4,
            mu_max: 1e6,
            outer_iters: 50,
            cg: CGConfig::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho.is_nan() || self.rho <= 1.0 {
            return Err(Error::InvalidArgument("rho must exceed 1".into()));
        }
        if self.mu0.is_nan() || self.mu0 <= 0.0 || self.mu_max < self.mu0 {
            return Err(Error::InvalidArgument(
                "penalty range needs 0 < mu0 <= mu_max".into(),
            ));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidArgument("lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// Recommended ranks per simulated noise level.
pub fn rank_preset(name: &str) -> Option<(usize, usize, usize)> {
    match name {
        "snr20" => Some((3, 150, 3)),
        "snr30" => Some((4, 200, 4)),
        "snr40" => Some((5, 250, 5)),
        _ => None,
    }
}

/// Mutable optimizer state: the three ring cores plus, in nuclear-norm mode,
/// the auxiliary spectral core, multiplier and current penalty.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub g1: DenseTensor,
    pub g2: DenseTensor,
    pub g3: DenseTensor,
    pub g0: Option<DenseTensor>,
    pub l: Option<DenseTensor>,
    pub mu: f64,
}

/// One trace record per outer sweep. `mu` and `g0_g3_residual` are absent in
/// plain CTRF mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub sweep: usize,
    pub objective: f64,
    pub hsi_term: f64,
    pub msi_term: f64,
    pub nuclear_term: f64,
    pub mu: Option<f64>,
    pub g0_g3_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateStats {
    pub cg_residual: f64,
    pub cg_iters: usize,
}

#[derive(Debug, Clone)]
pub struct FusionResult {
    pub cores: TRCores,
    pub x_hat: DenseTensor,
    pub trace: Vec<TraceRow>,
}

/// Sum of `left_k * G * gram_k` terms plus `shift * G`; every `gram_k` and
/// `left_k` is symmetric PSD, so the whole operator is.
struct GramOp<'a> {
    terms: Vec<(Option<&'a Matrix>, Matrix)>,
    shift: f64,
}

impl LinearOperator for GramOp<'_> {
    fn apply(&self, g: &Matrix) -> Matrix {
        let mut out: Option<Matrix> = None;
        for (left, gram) in &self.terms {
            let term = match left {
                Some(l) => l.dot(g).dot(gram),
                None => g.dot(gram),
            };
            out = Some(match out {
                Some(acc) => acc + term,
                None => term,
            });
        }
        let mut out = out.unwrap_or_else(|| Matrix::zeros(g.dim()));
        if self.shift != 0.0 {
            out += &(self.shift * g);
        }
        out
    }
}

pub struct Solver {
    problem: FusionProblem,
    cfg: SolverConfig,
    state: SolverState,
    trace: Vec<TraceRow>,
    sweeps_done: usize,
    // constants reused by every sweep
    p1t_p1: Matrix,
    p2t_p2: Matrix,
    p3t_p3: Matrix,
    p1t_y1: Matrix,
    p2t_y2: Matrix,
    y_u3: Matrix,
    z_u1: Matrix,
    z_u2: Matrix,
    p3t_z3: Matrix,
}

impl Solver {
    /// Builds a solver with randomly initialized cores (per `cfg.seed`).
    pub fn new(problem: FusionProblem, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let [m_full, n_full, b_full] = problem.hr_shape();
        let (r1, r2, r3) = problem.ranks;
        let cores = tr_init(&[m_full, n_full, b_full], &[r1, r2, r3], cfg.seed)?;
        Self::from_cores(problem, cfg, cores)
    }

    /// Builds a solver warm-started at the given cores.
    pub fn from_cores(problem: FusionProblem, cfg: SolverConfig, cores: TRCores) -> Result<Self> {
        cfg.validate()?;
        if cores.order() != 3 {
            return Err(Error::InvalidArgument("fusion uses order-3 rings".into()));
        }
        let [m_full, n_full, b_full] = problem.hr_shape();
        let (r1, r2, r3) = problem.ranks;
        let dims = cores.dims();
        let ranks = cores.ranks();
        if dims != [m_full, n_full, b_full] || ranks != [r1, r2, r3] {
            return Err(Error::ShapeMismatch(format!(
                "cores have dims {dims:?} ranks {ranks:?}, problem expects {:?} {:?}",
                [m_full, n_full, b_full],
                [r1, r2, r3]
            )));
        }
        let mut cores = cores.into_cores();
        let g3 = cores.pop().unwrap();
        let g2 = cores.pop().unwrap();
        let g1 = cores.pop().unwrap();
        let (g0, l) = match cfg.mode {
            FusionMode::Nctrf => (
                Some(g3.clone()),
                Some(DenseTensor::zeros(g3.shape().to_vec())?),
            ),
            FusionMode::Ctrf => (None, None),
        };
        let state = SolverState {
            g1,
            g2,
            g3,
            g0,
            l,
            mu: cfg.mu0,
        };
        let p1t_y1 = problem.model.p1.t().dot(&problem.y.tr_unfold(1)?);
        let p2t_y2 = problem.model.p2.t().dot(&problem.y.tr_unfold(2)?);
        let y_u3 = problem.y.tr_unfold(3)?;
        let z_u1 = problem.z.tr_unfold(1)?;
        let z_u2 = problem.z.tr_unfold(2)?;
        let p3t_z3 = problem.model.p3.t().dot(&problem.z.tr_unfold(3)?);
        Ok(Self {
            p1t_p1: problem.model.p1.t().dot(&problem.model.p1),
            p2t_p2: problem.model.p2.t().dot(&problem.model.p2),
            p3t_p3: problem.model.p3.t().dot(&problem.model.p3),
            p1t_y1,
            p2t_y2,
            y_u3,
            z_u1,
            z_u2,
            p3t_z3,
            problem,
            cfg,
            state,
            trace: Vec::new(),
            sweeps_done: 0,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn problem(&self) -> &FusionProblem {
        &self.problem
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }

    pub fn cores(&self) -> Result<TRCores> {
        TRCores::new(vec![
            self.state.g1.clone(),
            self.state.g2.clone(),
            self.state.g3.clone(),
        ])
    }

    /// Current estimate `Φ(G)`.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        tr_reconstruct(&self.cores()?)
    }

    /// Solves the spatial-row core subproblem and stores the result.
    pub fn update_g1(&mut self) -> Result<UpdateStats> {
        let g2p = self.state.g2.mode2_ttm(&self.problem.model.p2)?;
        let g3p = self.state.g3.mode2_ttm(&self.problem.model.p3)?;
        // a1/b1 hold the transposed coefficient matrices, one row per sample
        let a1 = merge_pair(&g2p, &self.state.g3)?.tr_unfold(2)?;
        let b1 = merge_pair(&self.state.g2, &g3p)?.tr_unfold(2)?;
        let rhs = self.p1t_y1.dot(&a1) + self.z_u1.dot(&b1);
        let op = GramOp {
            terms: vec![
                (Some(&self.p1t_p1), a1.t().dot(&a1)),
                (None, b1.t().dot(&b1)),
            ],
            shift: 0.0,
        };
        let x0 = self.state.g1.mode_n_unfold(2)?;
        let out = cg_solve(&op, &rhs, &x0, &self.cfg.cg)
            .map_err(|e| Error::Numerical(format!("spatial-row core update: {e}")))?;
        self.state.g1 = fold_n(&out.x, self.state.g1.shape(), 2)?;
        Ok(UpdateStats {
            cg_residual: out.residual,
            cg_iters: out.iters,
        })
    }

    /// Solves the spatial-column core subproblem and stores the result.
    pub fn update_g2(&mut self) -> Result<UpdateStats> {
        let g1p = self.state.g1.mode2_ttm(&self.problem.model.p1)?;
        let g3p = self.state.g3.mode2_ttm(&self.problem.model.p3)?;
        let a2 = merge_pair(&self.state.g3, &g1p)?.tr_unfold(2)?;
        let b2 = merge_pair(&g3p, &self.state.g1)?.tr_unfold(2)?;
        let rhs = self.p2t_y2.dot(&a2) + self.z_u2.dot(&b2);
        let op = GramOp {
            terms: vec![
                (Some(&self.p2t_p2), a2.t().dot(&a2)),
                (None, b2.t().dot(&b2)),
            ],
            shift: 0.0,
        };
        let x0 = self.state.g2.mode_n_unfold(2)?;
        let out = cg_solve(&op, &rhs, &x0, &self.cfg.cg)
            .map_err(|e| Error::Numerical(format!("spatial-column core update: {e}")))?;
        self.state.g2 = fold_n(&out.x, self.state.g2.shape(), 2)?;
        Ok(UpdateStats {
            cg_residual: out.residual,
            cg_iters: out.iters,
        })
    }

    /// Solves the spectral core subproblem; in nuclear-norm mode the penalty
    /// and multiplier terms enter the normal equations.
    pub fn update_g3(&mut self) -> Result<UpdateStats> {
        let g1p = self.state.g1.mode2_ttm(&self.problem.model.p1)?;
        let g2p = self.state.g2.mode2_ttm(&self.problem.model.p2)?;
        let a3 = merge_pair(&g1p, &g2p)?.tr_unfold(2)?;
        let b3 = merge_pair(&self.state.g1, &self.state.g2)?.tr_unfold(2)?;
        let mut rhs = self.y_u3.dot(&a3) + self.p3t_z3.dot(&b3);
        let mut shift = 0.0;
        if self.cfg.mode == FusionMode::Nctrf {
            // half of mu*(g0) + l from the stationarity of the augmented terms
            let g0 = self.state.g0.as_ref().expect("nctrf state has g0");
            let l = self.state.l.as_ref().expect("nctrf state has l");
            shift = self.state.mu / 2.0;
            rhs = rhs + &(shift * &g0.mode_n_unfold(2)?) + &(0.5 * &l.mode_n_unfold(2)?);
        }
        let op = GramOp {
            terms: vec![
                (None, a3.t().dot(&a3)),
                (Some(&self.p3t_p3), b3.t().dot(&b3)),
            ],
            shift,
        };
        let x0 = self.state.g3.mode_n_unfold(2)?;
        let out = cg_solve(&op, &rhs, &x0, &self.cfg.cg)
            .map_err(|e| Error::Numerical(format!("spectral core update: {e}")))?;
        self.state.g3 = fold_n(&out.x, self.state.g3.shape(), 2)?;
        Ok(UpdateStats {
            cg_residual: out.residual,
            cg_iters: out.iters,
        })
    }

    /// Closed-form refresh of the auxiliary spectral core by singular value
    /// thresholding at `lambda / mu`.
    pub fn update_g0(&mut self) -> Result<()> {
        if self.cfg.mode != FusionMode::Nctrf {
            return Ok(());
        }
        if self.state.mu.is_nan() || self.state.mu <= 0.0 {
            return Err(Error::Numerical("penalty must be positive for svt".into()));
        }
        let l = self.state.l.as_ref().expect("nctrf state has l");
        let w = self.state.g3.mode_n_unfold(2)? - &(l.mode_n_unfold(2)? / self.state.mu);
        let thresholded = svt(&w, self.cfg.lambda / self.state.mu)?;
        self.state.g0 = Some(fold_n(&thresholded, self.state.g3.shape(), 2)?);
        Ok(())
    }

    /// Multiplier ascent and capped geometric penalty growth.
    pub fn update_multiplier(&mut self) -> Result<()> {
        if self.cfg.mode != FusionMode::Nctrf {
            return Ok(());
        }
        let g0 = self.state.g0.as_ref().expect("nctrf state has g0");
        let gap = g0.sub(&self.state.g3)?;
        let l = self.state.l.as_ref().expect("nctrf state has l");
        self.state.l = Some(l.add(&gap.scale(self.state.mu))?);
        self.state.mu = (self.state.mu * self.cfg.rho).min(self.cfg.mu_max);
        Ok(())
    }

    /// Rescales the two spatial cores to equal Frobenius norms. The
    /// represented tensor is unchanged (the scales cancel in the ring), but
    /// the rescale stops the norm drift that alternating solves can build up
    /// along weakly observed directions.
    fn balance_spatial_cores(&mut self) {
        let n1 = self.state.g1.fro_norm();
        let n2 = self.state.g2.fro_norm();
        if n1 > 0.0 && n2 > 0.0 {
            let s = (n2 / n1).sqrt();
            self.state.g1 = self.state.g1.scale(s);
            self.state.g2 = self.state.g2.scale(1.0 / s);
        }
    }

    /// One outer iteration; appends a trace row.
    pub fn sweep(&mut self) -> Result<()> {
        self.update_g1()?;
        self.update_g2()?;
        self.update_g3()?;
        self.balance_spatial_cores();
        if self.cfg.mode == FusionMode::Nctrf {
            self.update_g0()?;
            self.update_multiplier()?;
        }
        self.sweeps_done += 1;
        let row = self.trace_row()?;
        if !row.objective.is_finite() {
            return Err(Error::Numerical(format!(
                "objective became non-finite at sweep {}",
                self.sweeps_done
            )));
        }
        self.trace.push(row);
        Ok(())
    }

    fn trace_row(&self) -> Result<TraceRow> {
        let (_, hsi, msi) = ctrf_objective(
            &self.problem,
            &self.state.g1,
            &self.state.g2,
            &self.state.g3,
        )?;
        let (nuclear_term, mu, residual) = match self.cfg.mode {
            FusionMode::Nctrf => {
                let nn = self.cfg.lambda * nuclear_norm(&self.state.g3.tr_unfold(2)?)?;
                let g0 = self.state.g0.as_ref().expect("nctrf state has g0");
                (nn, Some(self.state.mu), Some(g0.sub(&self.state.g3)?.fro_norm()))
            }
            FusionMode::Ctrf => (0.0, None, None),
        };
        Ok(TraceRow {
            sweep: self.sweeps_done,
            objective: hsi + msi + nuclear_term,
            hsi_term: hsi,
            msi_term: msi,
            nuclear_term,
            mu,
            g0_g3_residual: residual,
        })
    }

    /// Runs the configured number of outer iterations.
    pub fn run(&mut self) -> Result<()> {
        for _ in 0..self.cfg.outer_iters {
            self.sweep()?;
        }
        Ok(())
    }
}

/// Data-fit objective: squared residuals of both observations
/// against the degraded-core reconstructions. Returns `(total, hsi, msi)`.
pub fn ctrf_objective(
    problem: &FusionProblem,
    g1: &DenseTensor,
    g2: &DenseTensor,
    g3: &DenseTensor,
) -> Result<(f64, f64, f64)> {
    let g1p = g1.mode2_ttm(&problem.model.p1)?;
    let g2p = g2.mode2_ttm(&problem.model.p2)?;
    let g3p = g3.mode2_ttm(&problem.model.p3)?;
    let y_hat = tr_reconstruct(&TRCores::new(vec![g1p, g2p, g3.clone()])?)?;
    let z_hat = tr_reconstruct(&TRCores::new(vec![g1.clone(), g2.clone(), g3p])?)?;
    let hsi = problem.y.sub(&y_hat)?.fro_norm().powi(2);
    let msi = problem.z.sub(&z_hat)?.fro_norm().powi(2);
    Ok((hsi + msi, hsi, msi))
}

/// Data-fit objective plus `lambda` times the nuclear norm of the spectral
/// core's cyclic mode-2 unfolding.
pub fn nctrf_objective(
    problem: &FusionProblem,
    g1: &DenseTensor,
    g2: &DenseTensor,
    g3: &DenseTensor,
    lambda: f64,
) -> Result<f64> {
    let (total, _, _) = ctrf_objective(problem, g1, g2, g3)?;
    Ok(total + lambda * nuclear_norm(&g3.tr_unfold(2)?)?)
}

/// Full augmented Lagrangian value at the given state.
pub fn augmented_lagrangian(
    problem: &FusionProblem,
    state: &SolverState,
    lambda: f64,
) -> Result<f64> {
    let (data, _, _) = ctrf_objective(problem, &state.g1, &state.g2, &state.g3)?;
    let g0 = state
        .g0
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("state has no auxiliary core".into()))?;
    let l = state
        .l
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("state has no multiplier".into()))?;
    let gap = g0.sub(&state.g3)?;
    Ok(data
        + lambda * nuclear_norm(&g0.mode_n_unfold(2)?)?
        + crate::tensor::inner(l, &gap)?
        + 0.5 * state.mu * gap.fro_norm().powi(2))
}

/// Runs the full pipeline: random init, `outer_iters` sweeps, reconstruction.
pub fn solve(problem: &FusionProblem, cfg: &SolverConfig) -> Result<FusionResult> {
    let mut solver = Solver::new(problem.clone(), *cfg)?;
    solver.run()?;
    let cores = solver.cores()?;
    let x_hat = tr_reconstruct(&cores)?;
    Ok(FusionResult {
        cores,
        x_hat,
        trace: solver.trace.clone(),
    })
}

/// Plain tensor-ring fit of a fully observed tensor by the same block
/// machinery (identity degradations are implied): used by the signature
/// analysis. Ranks are `(R_1,...,R_N)`.
pub fn fit_tr(
    t: &DenseTensor,
    ranks: &[usize],
    outer_iters: usize,
    seed: u64,
    cg: &CGConfig,
) -> Result<TRCores> {
    let mut ring = tr_init(t.shape(), ranks, seed)?;
    let n = ring.order();
    // precompute the cyclic unfoldings of the data once
    let unfolds: Vec<Matrix> = (1..=n).map(|k| t.tr_unfold(k)).collect::<Result<_>>()?;
    for _ in 0..outer_iters {
        for k in 1..=n {
            let rest = if n == 1 {
                return Err(Error::InvalidArgument("fit needs order >= 2".into()));
            } else {
                crate::ring::merge_cores(&ring, k % n + 1, (k + n - 2) % n + 1)?
            };
            let a = rest.tr_unfold(2)?;
            let rhs = unfolds[k - 1].dot(&a);
            let op = GramOp {
                terms: vec![(None, a.t().dot(&a))],
                shift: 0.0,
            };
            let x0 = ring.core(k)?.mode_n_unfold(2)?;
            let out = cg_solve(&op, &rhs, &x0, cg)
                .map_err(|e| Error::Numerical(format!("tr fit core {k}: {e}")))?;
            let shape = ring.core(k)?.shape().to_vec();
            ring.set_core(k, fold_n(&out.x, &shape, 2)?)?;
        }
    }
    Ok(ring)
}

/// Multi-restart wrapper around [`fit_tr`]: tries seeds `seed..seed+restarts`
/// and keeps the ring with the smallest relative reconstruction error.
/// Alternating fits from a single random init can stall in local minima.
pub fn fit_tr_multi(
    t: &DenseTensor,
    ranks: &[usize],
    outer_iters: usize,
    restarts: usize,
    seed: u64,
    cg: &CGConfig,
) -> Result<TRCores> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    let norm = t.fro_norm().max(1e-300);
    let mut best: Option<(f64, TRCores)> = None;
    for k in 0..restarts {
        let ring = fit_tr(t, ranks, outer_iters, seed + k as u64, cg)?;
        let err = tr_reconstruct(&ring)?.sub(t)?.fro_norm() / norm;
        if best.as_ref().is_none_or(|(b, _)| err < *b) {
            best = Some((err, ring));
        }
    }
    Ok(best.unwrap().1)
}
