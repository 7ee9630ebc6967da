//! Tensor-ring representation: cores, merging, reconstruction, random
//! initialization and the rank-bound diagnostic.
//!
//! A ring of order N stores cores `G(n)` of shape `(R_n, I_n, R_{n+1})` with
//! `R_{N+1} = R_1`. Core and mode numbers in this module are 1-based.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::numeric_rank;
use crate::tensor::{DenseTensor, Matrix};

/// Ordered list of order-3 cores with ring-consistent ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct TRCores {
    cores: Vec<DenseTensor>,
}

impl TRCores {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidArgument("ring needs at least one core".into()));
        }
        for (k, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "core {} has order {}, expected 3",
                    k + 1,
                    c.order()
                )));
            }
        }
        for k in 0..cores.len() {
            let next = (k + 1) % cores.len();
            if cores[k].shape()[2] != cores[next].shape()[0] {
                return Err(Error::ShapeMismatch(format!(
                    "core {} third dim {} does not match core {} first dim {}",
                    k + 1,
                    cores[k].shape()[2],
                    next + 1,
                    cores[next].shape()[0]
                )));
            }
        }
        Ok(Self { cores })
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    /// Bond ranks `R_1..R_N`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[0]).collect()
    }

    /// Mode extents `I_1..I_N` of the represented tensor.
    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    /// Core `G(n)`, 1-based.
    pub fn core(&self, n: usize) -> Result<&DenseTensor> {
        self.cores
            .get(n.wrapping_sub(1))
            .ok_or(Error::ModeOutOfRange {
                mode: n,
                order: self.order(),
            })
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    /// Replaces core `n` (1-based), keeping ring consistency checked.
    pub fn set_core(&mut self, n: usize, core: DenseTensor) -> Result<()> {
        if n == 0 || n > self.order() {
            return Err(Error::ModeOutOfRange {
                mode: n,
                order: self.order(),
            });
        }
        let mut cores = self.cores.clone();
        cores[n - 1] = core;
        *self = Self::new(cores)?;
        Ok(())
    }

    /// Cyclically rotates the core list left by `k`, representing
    /// `circ_shift(tr_reconstruct(self), k)`.
    pub fn rotate(&self, k: usize) -> TRCores {
        let n = self.order();
        let cores = (0..n).map(|i| self.cores[(i + k) % n].clone()).collect();
        TRCores { cores }
    }
}

/// Lateral slice `G(n)(i)` as an `R_n x R_{n+1}` matrix.
fn slice_mat(core: &DenseTensor, i: usize) -> Matrix {
    let (ra, rb) = (core.shape()[0], core.shape()[2]);
    Matrix::from_shape_fn((ra, rb), |(a, b)| core.get(&[a, i, b]).unwrap())
}

/// Element `H(i_1,...,i_N)` as the trace of the slice-matrix product.
pub fn tr_element(c: &TRCores, idx: &[usize]) -> Result<f64> {
    let dims = c.dims();
    if idx.len() != dims.len() {
        return Err(Error::ShapeMismatch(format!(
            "index of length {} against order-{} ring",
            idx.len(),
            dims.len()
        )));
    }
    for (k, (&i, &d)) in idx.iter().zip(dims.iter()).enumerate() {
        if i >= d {
            return Err(Error::InvalidArgument(format!(
                "index {i} out of bounds for mode {} of extent {d}",
                k + 1
            )));
        }
    }
    let mut acc = slice_mat(&c.cores()[0], idx[0]);
    for (core, &i) in c.cores().iter().zip(idx.iter()).skip(1) {
        acc = acc.dot(&slice_mat(core, i));
    }
    Ok(acc.diag().sum())
}

/// Multilinear product of two adjacent cores: the merged slice at middle
/// index `(j * I_a + i)` is `A(i) * B(j)`.
pub fn merge_pair(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.order() != 3 || b.order() != 3 {
        return Err(Error::InvalidArgument("merge_pair expects order-3 cores".into()));
    }
    let (ra, ia, rm) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let (rm2, ib, rc) = (b.shape()[0], b.shape()[1], b.shape()[2]);
    if rm != rm2 {
        return Err(Error::ShapeMismatch(format!(
            "merge bond mismatch: {rm} vs {rm2}"
        )));
    }
    // one matmul: rows stack (i, r_a), columns stack (j, r_c)
    let left = Matrix::from_shape_fn((ia * ra, rm), |(row, rb)| {
        let (i, r) = (row / ra, row % ra);
        a.get(&[r, i, rb]).unwrap()
    });
    let right = Matrix::from_shape_fn((rm, ib * rc), |(rb, col)| {
        let (j, r) = (col / rc, col % rc);
        b.get(&[rb, j, r]).unwrap()
    });
    let prod = left.dot(&right);
    let mut out = DenseTensor::zeros(vec![ra, ia * ib, rc])?;
    {
        let data = out.data_mut();
        // canonical layout: index = r_a*(Ia*Ib*Rc) + s*Rc + r_c, s = j*Ia + i
        for i in 0..ia {
            for r_a in 0..ra {
                let row = i * ra + r_a;
                for j in 0..ib {
                    let s = j * ia + i;
                    for r_c in 0..rc {
                        data[r_a * (ia * ib * rc) + s * rc + r_c] = prod[[row, j * rc + r_c]];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Merges the cyclic-contiguous core range `from..=to` (1-based, wrapping)
/// left-to-right into a single order-3 core.
pub fn merge_cores(c: &TRCores, from: usize, to: usize) -> Result<DenseTensor> {
    let n = c.order();
    if from == 0 || from > n || to == 0 || to > n {
        return Err(Error::InvalidArgument(format!(
            "merge range {from}..={to} out of bounds for order-{n} ring"
        )));
    }
    let len = (to + n - from) % n + 1;
    let mut acc = c.cores()[from - 1].clone();
    for step in 1..len {
        let k = (from - 1 + step) % n;
        acc = merge_pair(&acc, &c.cores()[k])?;
    }
    Ok(acc)
}

/// Full tensor `Φ(G)`, built by sequential core merging.
pub fn tr_reconstruct(c: &TRCores) -> Result<DenseTensor> {
    let dims = c.dims();
    let n = c.order();
    if n == 1 {
        let core = &c.cores()[0];
        return DenseTensor::from_fn(vec![dims[0]], |idx| {
            slice_mat(core, idx[0]).diag().sum()
        });
    }
    // block identity: X[I_1..I_{N-1}, I_N] = merge(1..N-1)_(2) * (G(N)_<2>)^T
    let left = merge_cores(c, 1, n - 1)?;
    let block = left.mode_n_unfold(2)?.dot(&c.cores()[n - 1].tr_unfold(2)?.t());
    let mut out = DenseTensor::zeros(dims.clone())?;
    let lead: usize = dims[..n - 1].iter().product();
    // canonical strides of the output
    let mut strides = vec![1usize; n];
    for k in (0..n - 1).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let data = out.data_mut();
    for row in 0..lead {
        // decode row as (i_1 fastest ... i_{N-1} slowest)
        let mut rem = row;
        let mut base = 0usize;
        for k in 0..n - 1 {
            let i = rem % dims[k];
            rem /= dims[k];
            base += i * strides[k];
        }
        for i_last in 0..dims[n - 1] {
            data[base + i_last * strides[n - 1]] = block[[row, i_last]];
        }
    }
    Ok(out)
}

/// Random ring with i.i.d. Gaussian cores, each scaled to Frobenius norm
/// `target_norm^(1/N)`; deterministic for a fixed seed.
pub fn tr_init_scaled(
    shape: &[usize],
    ranks: &[usize],
    seed: u64,
    target_norm: f64,
) -> Result<TRCores> {
    if shape.len() != ranks.len() {
        return Err(Error::InvalidArgument(format!(
            "{} ranks for an order-{} shape",
            ranks.len(),
            shape.len()
        )));
    }
    if ranks.contains(&0) {
        return Err(Error::InvalidArgument("ranks must be >= 1".into()));
    }
    if target_norm <= 0.0 {
        return Err(Error::InvalidArgument("target norm must be positive".into()));
    }
    let n = shape.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_core = target_norm.powf(1.0 / n as f64);
    let mut cores = Vec::with_capacity(n);
    for k in 0..n {
        let (ra, rb) = (ranks[k], ranks[(k + 1) % n]);
        let len = ra * shape[k] * rb;
        let mut data: Vec<f64> = (0..len)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = data.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let s = per_core / norm;
            for v in &mut data {
                *v *= s;
            }
        }
        cores.push(DenseTensor::new(vec![ra, shape[k], rb], data)?);
    }
    TRCores::new(cores)
}

pub fn tr_init(shape: &[usize], ranks: &[usize], seed: u64) -> Result<TRCores> {
    tr_init_scaled(shape, ranks, seed, 1.0)
}

/// Outcome of the rank bound `rank(G(n)_<2>) >= rank(Φ(G)_(n))`.
#[derive(Debug, Clone, Copy)]
pub struct RankBound {
    /// Numeric rank of the core-side unfolding `G(n)_<2>`.
    pub rank_lhs: usize,
    /// Numeric rank of the tensor-side unfolding `Φ(G)_(n)`.
    pub rank_rhs: usize,
    pub holds: bool,
}

pub fn rank_bound_check(c: &TRCores, n: usize, tol: f64) -> Result<RankBound> {
    let core = c.core(n)?.clone();
    let rank_lhs = numeric_rank(&core.tr_unfold(2)?, tol)?;
    let full = tr_reconstruct(c)?;
    let rank_rhs = numeric_rank(&full.mode_n_unfold(n)?, tol)?;
    Ok(RankBound {
        rank_lhs,
        rank_rhs,
        holds: rank_lhs >= rank_rhs,
    })
}
