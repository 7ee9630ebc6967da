//! Dense N-dimensional tensors and the unfolding/folding primitives.
//!
//! Conventions used across the whole crate:
//! - Elements are stored in a canonical linearization with the **first index
//!   slowest** (`data[i1*I2*...*IN + ... + iN]`).
//! - Mode indices in the public API are 1-based (`1..=N`), matching the usual
//!   mode-n terminology; element indices are 0-based.
//! - Every unfolding enumerates its column (or row) modes with the **first
//!   listed mode varying fastest**.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Dense matrix of `f64`, row-major.
pub type Matrix = Array2<f64>;

/// Dense real tensor of arbitrary order with canonical (first index slowest)
/// element layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor from a shape and its canonically linearized data.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "tensor shape must be non-empty with positive dims, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match shape {:?} (product {})",
                data.len(),
                shape,
                expected
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    /// Builds a tensor by evaluating `f` at every (0-based) multi-index.
    pub fn from_fn<F: FnMut(&[usize]) -> f64>(shape: Vec<usize>, mut f: F) -> Result<Self> {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            // odometer with the last index fastest, matching the linearization
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(shape, data)
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Canonical strides: first index slowest, last index contiguous.
    fn strides(&self) -> Vec<usize> {
        let n = self.shape.len();
        let mut s = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        let lin = self.linear_index(idx)?;
        Ok(self.data[lin])
    }

    fn linear_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "index of length {} against order-{} tensor",
                idx.len(),
                self.shape.len()
            )));
        }
        let strides = self.strides();
        let mut lin = 0usize;
        for (k, (&i, &d)) in idx.iter().zip(self.shape.iter()).enumerate() {
            if i >= d {
                return Err(Error::InvalidArgument(format!(
                    "index {i} out of bounds for dim {k} of extent {d}"
                )));
            }
            lin += i * strides[k];
        }
        Ok(lin)
    }

    fn check_mode(&self, n: usize) -> Result<usize> {
        if n == 0 || n > self.order() {
            return Err(Error::ModeOutOfRange {
                mode: n,
                order: self.order(),
            });
        }
        Ok(n - 1)
    }

    /// Classical mode-n unfolding: rows run over mode `n`, columns enumerate
    /// the remaining modes in ascending order with the earliest mode fastest.
    pub fn mode_n_unfold(&self, n: usize) -> Result<Matrix> {
        let axis = self.check_mode(n)?;
        let col_axes: Vec<usize> = (0..self.order()).filter(|&k| k != axis).collect();
        self.unfold_along(axis, &col_axes)
    }

    /// Cyclic mode-n unfolding: rows run over mode `n`, columns enumerate
    /// modes `n+1,...,N,1,...,n-1` with mode `n+1` fastest.
    pub fn tr_unfold(&self, n: usize) -> Result<Matrix> {
        let axis = self.check_mode(n)?;
        let order = self.order();
        let col_axes: Vec<usize> = (1..order).map(|k| (axis + k) % order).collect();
        self.unfold_along(axis, &col_axes)
    }

    fn unfold_along(&self, row_axis: usize, col_axes: &[usize]) -> Result<Matrix> {
        let rows = self.shape[row_axis];
        let cols: usize = col_axes.iter().map(|&k| self.shape[k]).product();
        let strides = self.strides();
        let mut m = Matrix::zeros((rows, cols.max(1)));
        // enumerate column modes with the first listed axis fastest
        let mut idx = vec![0usize; col_axes.len()];
        for c in 0..cols.max(1) {
            let base: usize = col_axes
                .iter()
                .zip(idx.iter())
                .map(|(&k, &i)| i * strides[k])
                .sum();
            for r in 0..rows {
                m[[r, c]] = self.data[base + r * strides[row_axis]];
            }
            for (k, &ax) in col_axes.iter().enumerate() {
                idx[k] += 1;
                if idx[k] < self.shape[ax] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(m)
    }

    /// Matricization with the first `i` modes as rows and the rest as columns
    /// (first listed mode fastest on both sides).
    pub fn block_unfold(&self, i: usize) -> Result<Matrix> {
        if i == 0 || i >= self.order() {
            return Err(Error::InvalidArgument(format!(
                "split point {i} out of range for order-{} tensor",
                self.order()
            )));
        }
        let rows: usize = self.shape[..i].iter().product();
        let cols: usize = self.shape[i..].iter().product();
        let strides = self.strides();
        let mut m = Matrix::zeros((rows, cols));
        let row_axes: Vec<usize> = (0..i).collect();
        let col_axes: Vec<usize> = (i..self.order()).collect();
        let mut col_idx = vec![0usize; col_axes.len()];
        for c in 0..cols {
            let col_base: usize = col_axes
                .iter()
                .zip(col_idx.iter())
                .map(|(&k, &ix)| ix * strides[k])
                .sum();
            let mut row_idx = vec![0usize; row_axes.len()];
            for r in 0..rows {
                let off: usize = row_axes
                    .iter()
                    .zip(row_idx.iter())
                    .map(|(&k, &ix)| ix * strides[k])
                    .sum();
                m[[r, c]] = self.data[col_base + off];
                for (k, &ax) in row_axes.iter().enumerate() {
                    row_idx[k] += 1;
                    if row_idx[k] < self.shape[ax] {
                        break;
                    }
                    row_idx[k] = 0;
                }
            }
            for (k, &ax) in col_axes.iter().enumerate() {
                col_idx[k] += 1;
                if col_idx[k] < self.shape[ax] {
                    break;
                }
                col_idx[k] = 0;
            }
        }
        Ok(m)
    }

    /// Circularly shifts the dimensions by `n`: output shape is
    /// `(I_{n+1},...,I_N,I_1,...,I_n)` and `out(i_{n+1},...,i_n) = t(i_1,...,i_N)`.
    pub fn circ_shift(&self, n: usize) -> Result<DenseTensor> {
        let order = self.order();
        if n >= order {
            return Err(Error::InvalidArgument(format!(
                "shift count {n} out of range for order-{order} tensor"
            )));
        }
        if n == 0 {
            return Ok(self.clone());
        }
        let perm: Vec<usize> = (0..order).map(|k| (k + n) % order).collect();
        let new_shape: Vec<usize> = perm.iter().map(|&k| self.shape[k]).collect();
        let strides = self.strides();
        let mut out = DenseTensor::zeros(new_shape.clone())?;
        let out_strides = out.strides();
        let mut idx = vec![0usize; order]; // index into the output
        for lin_out in 0..self.data.len() {
            let src: usize = perm
                .iter()
                .zip(idx.iter())
                .map(|(&k, &i)| i * strides[k])
                .sum();
            out.data[lin_out] = self.data[src];
            debug_assert_eq!(
                lin_out,
                idx.iter()
                    .zip(out_strides.iter())
                    .map(|(&i, &s)| i * s)
                    .sum::<usize>()
            );
            for k in (0..order).rev() {
                idx[k] += 1;
                if idx[k] < new_shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(out)
    }

    /// Mode-n tensor-matrix product: folds `p * mode_n_unfold(self, n)` back
    /// along mode `n`, replacing extent `I_n` by `p.nrows()`.
    pub fn mode_product(&self, p: &Matrix, n: usize) -> Result<DenseTensor> {
        let axis = self.check_mode(n)?;
        if p.ncols() != self.shape[axis] {
            return Err(Error::ShapeMismatch(format!(
                "operator has {} columns but mode {} extent is {}",
                p.ncols(),
                n,
                self.shape[axis]
            )));
        }
        let unf = self.mode_n_unfold(n)?;
        let prod = p.dot(&unf);
        let mut new_shape = self.shape.clone();
        new_shape[axis] = p.nrows();
        fold_n(&prod, &new_shape, n)
    }

    /// Mode-2 product for order-3 cores, `core ×₂ p`.
    pub fn mode2_ttm(&self, p: &Matrix) -> Result<DenseTensor> {
        if self.order() != 3 {
            return Err(Error::InvalidArgument(format!(
                "mode2_ttm expects an order-3 core, got order {}",
                self.order()
            )));
        }
        self.mode_product(p, 2)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Elementwise sum with `other`, shapes must match.
    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &DenseTensor, f: F) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "elementwise op on shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Exact inverse of [`DenseTensor::mode_n_unfold`].
pub fn fold_n(m: &Matrix, shape: &[usize], n: usize) -> Result<DenseTensor> {
    if n == 0 || n > shape.len() {
        return Err(Error::ModeOutOfRange {
            mode: n,
            order: shape.len(),
        });
    }
    let axis = n - 1;
    let rows = shape[axis];
    let cols: usize = shape
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != axis)
        .map(|(_, &d)| d)
        .product();
    if m.nrows() != rows || m.ncols() != cols.max(1) {
        return Err(Error::ShapeMismatch(format!(
            "matrix {}x{} inconsistent with shape {:?} folded along mode {}",
            m.nrows(),
            m.ncols(),
            shape,
            n
        )));
    }
    let mut t = DenseTensor::zeros(shape.to_vec())?;
    let strides = t.strides();
    let col_axes: Vec<usize> = (0..shape.len()).filter(|&k| k != axis).collect();
    let mut idx = vec![0usize; col_axes.len()];
    for c in 0..cols.max(1) {
        let base: usize = col_axes
            .iter()
            .zip(idx.iter())
            .map(|(&k, &i)| i * strides[k])
            .sum();
        for r in 0..rows {
            t.data[base + r * strides[axis]] = m[[r, c]];
        }
        for (k, &ax) in col_axes.iter().enumerate() {
            idx[k] += 1;
            if idx[k] < shape[ax] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(t)
}

/// Standard Kronecker product (the first factor indexes the coarse blocks).
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Matrix::zeros((ar * br, ac * bc));
    for ia in 0..ar {
        for ja in 0..ac {
            let v = a[[ia, ja]];
            if v == 0.0 {
                continue;
            }
            for ib in 0..br {
                for jb in 0..bc {
                    out[[ia * br + ib, ja * bc + jb]] = v * b[[ib, jb]];
                }
            }
        }
    }
    out
}

/// Frobenius inner product of two same-shaped tensors.
pub fn inner(t: &DenseTensor, w: &DenseTensor) -> Result<f64> {
    if t.shape() != w.shape() {
        return Err(Error::ShapeMismatch(format!(
            "inner product on shapes {:?} and {:?}",
            t.shape(),
            w.shape()
        )));
    }
    Ok(t.data()
        .iter()
        .zip(w.data().iter())
        .map(|(&a, &b)| a * b)
        .sum())
}

/// Frobenius inner product of two same-shaped matrices.
pub fn mat_inner(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

pub fn mat_fro_norm(a: &Matrix) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// The 2x2x2 fixture with t(i,j,k) = 4(i-1)+2(j-1)+k in 1-based indices,
    /// i.e. values 1..8 in canonical order.
    fn tensor_1_to_8() -> DenseTensor {
        DenseTensor::new(vec![2, 2, 2], (1..=8).map(|v| v as f64).collect()).unwrap()
    }

    fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> DenseTensor {
        let len = shape.iter().product();
        DenseTensor::new(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn invalid_shape_rejected() {
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn mode_unfold_matches_index_oracle() {
        // oracle: explicit loop over all index tuples applying the stated
        // column-index formula (earlier modes fastest)
        let t = tensor_1_to_8();
        let m = t.mode_n_unfold(2).unwrap();
        assert_eq!(m.dim(), (2, 4));
        let mut oracle = Matrix::zeros((2, 4));
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let col = i + 2 * k; // remaining modes (1,3), mode 1 fastest
                    oracle[[j, col]] = t.get(&[i, j, k]).unwrap();
                }
            }
        }
        assert_eq!(m, oracle);
        assert_eq!(
            m.row(0).to_vec(),
            vec![1.0, 5.0, 2.0, 6.0],
            "row with j=1 ordered i fastest then k"
        );
        assert_eq!(m.row(1).to_vec(), vec![3.0, 7.0, 4.0, 8.0]);
    }

    #[test]
    fn mode_unfold_order_one() {
        let t = DenseTensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let m = t.mode_n_unfold(1).unwrap();
        assert_eq!(m.dim(), (3, 1));
        assert_eq!(m.column(0).to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn mode_unfold_zero_tensor() {
        let t = DenseTensor::zeros(vec![3, 4, 5]).unwrap();
        let m = t.mode_n_unfold(3).unwrap();
        assert_eq!(m.dim(), (5, 12));
        assert!(m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mode_out_of_range() {
        let t = tensor_1_to_8();
        assert!(t.mode_n_unfold(0).is_err());
        assert!(t.mode_n_unfold(4).is_err());
        assert!(t.tr_unfold(0).is_err());
    }

    #[test]
    fn tr_unfold_matches_index_oracle() {
        let t = tensor_1_to_8();
        let m = t.tr_unfold(2).unwrap();
        assert_eq!(m.dim(), (2, 4));
        // columns ordered (k fastest, then i)
        assert_eq!(m.row(0).to_vec(), vec![1.0, 2.0, 5.0, 6.0]);
        assert_eq!(m.row(1).to_vec(), vec![3.0, 4.0, 7.0, 8.0]);
    }

    #[test]
    fn tr_unfold_mode_one_coincides_with_classic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_tensor(vec![3, 4, 2], &mut rng);
        assert_eq!(t.tr_unfold(1).unwrap(), t.mode_n_unfold(1).unwrap());
    }

    #[test]
    fn tr_unfold_is_shifted_mode_one_unfold() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = random_tensor(vec![3, 4, 2, 5], &mut rng);
        for n in 1..=4 {
            let direct = t.tr_unfold(n).unwrap();
            let shifted = t.circ_shift(n - 1).unwrap().mode_n_unfold(1).unwrap();
            assert_eq!(direct, shifted);
        }
    }

    #[test]
    fn tr_and_mode_unfold_same_rows_up_to_column_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random_tensor(vec![3, 4, 2], &mut rng);
        let a = t.mode_n_unfold(2).unwrap();
        let b = t.tr_unfold(2).unwrap();
        let sorted_cols = |m: &Matrix| {
            let mut cols: Vec<Vec<_>> = m
                .columns()
                .into_iter()
                .map(|c| c.iter().map(|v| v.to_bits()).collect())
                .collect();
            cols.sort();
            cols
        };
        assert_eq!(sorted_cols(&a), sorted_cols(&b));
        // column permutations leave the singular values alone
        let sa = crate::numerics::svd_thin(&a).unwrap().s;
        let sb = crate::numerics::svd_thin(&b).unwrap().s;
        for (x, y) in sa.iter().zip(sb.iter()) {
            assert!((x - y).abs() <= 1e-10 * sa[0].max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn block_unfold_shapes_and_mode_one_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = random_tensor(vec![2, 3, 4], &mut rng);
        assert_eq!(t.block_unfold(2).unwrap().dim(), (6, 4));
        let t8 = tensor_1_to_8();
        assert_eq!(t8.block_unfold(1).unwrap(), t8.mode_n_unfold(1).unwrap());
        assert!(t.block_unfold(0).is_err());
        assert!(t.block_unfold(3).is_err());
    }

    #[test]
    fn block_unfold_rank_one_outer_product() {
        // rank-1 tensor a∘b∘c split at i=2 factors through c^T with rank 1
        let a = [1.0, -2.0];
        let b = [0.5, 1.5, 2.0];
        let c = [3.0, -1.0, 0.25, 4.0];
        let t = DenseTensor::from_fn(vec![2, 3, 4], |ix| a[ix[0]] * b[ix[1]] * c[ix[2]]).unwrap();
        let m = t.block_unfold(2).unwrap();
        // left vector: vec of a∘b with the first mode fastest
        let mut ab = [0.0; 6];
        for i in 0..2 {
            for j in 0..3 {
                ab[i + 2 * j] = a[i] * b[j];
            }
        }
        for r in 0..6 {
            for col in 0..4 {
                assert!((m[[r, col]] - ab[r] * c[col]).abs() < 1e-12);
            }
        }
        assert_eq!(crate::numerics::numeric_rank(&m, 1e-9).unwrap(), 1);
    }

    #[test]
    fn fold_is_exact_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_tensor(vec![3, 2, 4, 2], &mut rng);
        for n in 1..=4 {
            let m = t.mode_n_unfold(n).unwrap();
            let back = fold_n(&m, t.shape(), n).unwrap();
            assert_eq!(back, t, "bitwise round-trip for mode {n}");
        }
    }

    #[test]
    fn fold_zero_matrix() {
        let m = Matrix::zeros((3, 8));
        let t = fold_n(&m, &[2, 3, 4], 2).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));
        assert!(fold_n(&m, &[2, 3, 5], 2).is_err());
    }

    #[test]
    fn tr_round_trip_through_circ_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = random_tensor(vec![2, 3, 4], &mut rng);
        for n in 1..=3 {
            let m = t.tr_unfold(n).unwrap();
            let shifted_shape: Vec<usize> =
                (0..3).map(|k| t.shape()[(k + n - 1) % 3]).collect();
            let shifted = fold_n(&m, &shifted_shape, 1).unwrap();
            let back = shifted.circ_shift((3 - (n - 1)) % 3).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn circ_shift_identity_and_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = random_tensor(vec![2, 3, 4], &mut rng);
        assert_eq!(t.circ_shift(0).unwrap(), t);
        assert_eq!(t.circ_shift(1).unwrap().shape(), &[3, 4, 2]);
        assert!(t.circ_shift(3).is_err());
    }

    #[test]
    fn circ_shift_composes_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let t = random_tensor(vec![3, 2, 4], &mut rng);
        let cycled = t
            .circ_shift(1)
            .unwrap()
            .circ_shift(1)
            .unwrap()
            .circ_shift(1)
            .unwrap();
        assert_eq!(cycled, t);
        // shift by a then b equals shift by (a+b) mod N
        let ab = t.circ_shift(2).unwrap().circ_shift(2).unwrap();
        assert_eq!(ab, t.circ_shift(1).unwrap());
    }

    #[test]
    fn circ_shift_moves_elements_without_recomputing() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let t = random_tensor(vec![4, 3, 5], &mut rng);
        let shifted = t.circ_shift(2).unwrap();
        let mut a: Vec<u64> = t.data().iter().map(|v| v.to_bits()).collect();
        let mut b: Vec<u64> = shifted.data().iter().map(|v| v.to_bits()).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        let (na, nt) = (shifted.fro_norm(), t.fro_norm());
        assert!((na - nt).abs() <= 4.0 * f64::EPSILON * nt);
    }

    #[test]
    fn mode2_ttm_identity_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let core = random_tensor(vec![2, 4, 3], &mut rng);
        let id = Matrix::eye(4);
        assert_eq!(core.mode2_ttm(&id).unwrap(), core);

        let mean_row = Matrix::from_elem((1, 4), 0.25);
        let collapsed = core.mode2_ttm(&mean_row).unwrap();
        assert_eq!(collapsed.shape(), &[2, 1, 3]);
        for r in 0..2 {
            for c in 0..3 {
                let mean: f64 =
                    (0..4).map(|j| core.get(&[r, j, c]).unwrap()).sum::<f64>() / 4.0;
                assert!((collapsed.get(&[r, 0, c]).unwrap() - mean).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mode2_ttm_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let core = random_tensor(vec![2, 4, 3], &mut rng);
        let p = Matrix::from_shape_fn((2, 4), |_| rng.gen_range(-1.0..1.0));
        let out = core.mode2_ttm(&p).unwrap();
        assert_eq!(out.shape(), &[2, 2, 3]);
        for a in 0..2 {
            for r in 0..2 {
                for b in 0..3 {
                    let expect: f64 = (0..4)
                        .map(|j| p[[r, j]] * core.get(&[a, j, b]).unwrap())
                        .sum();
                    assert!((out.get(&[a, r, b]).unwrap() - expect).abs() < 1e-12);
                }
            }
        }
        let bad = Matrix::zeros((2, 5));
        assert!(core.mode2_ttm(&bad).is_err());
    }

    #[test]
    fn kron_identities_and_hand_case() {
        let i6 = kron(&Matrix::eye(2), &Matrix::eye(3));
        assert_eq!(i6, Matrix::eye(6));

        let a = Matrix::from_shape_vec((1, 2), vec![1.0, 2.0]).unwrap();
        let b = Matrix::from_shape_vec((2, 1), vec![3.0, 4.0]).unwrap();
        let k = kron(&a, &b);
        assert_eq!(k, Matrix::from_shape_vec((2, 2), vec![3.0, 6.0, 4.0, 8.0]).unwrap());
    }

    #[test]
    fn kron_vectorization_pairs_with_block_unfold() {
        // two-path oracle: mode products vs one Kronecker-assembled operator;
        // with block_unfold's mode-1-fastest rows the matching factor order is
        // kron(p2, p1)
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let x = random_tensor(vec![4, 6, 5], &mut rng);
        let p1 = Matrix::from_shape_fn((2, 4), |_| rng.gen_range(-1.0..1.0));
        let p2 = Matrix::from_shape_fn((3, 6), |_| rng.gen_range(-1.0..1.0));
        let y = x.mode_product(&p1, 1).unwrap().mode_product(&p2, 2).unwrap();
        let lhs = y.block_unfold(2).unwrap();
        let rhs = kron(&p2, &p1).dot(&x.block_unfold(2).unwrap());
        let err = mat_fro_norm(&(&lhs - &rhs)) / mat_fro_norm(&lhs);
        assert!(err < 1e-10, "two degradation paths disagree: {err}");
    }

    #[test]
    fn inner_and_fro_norm() {
        let t = DenseTensor::new(vec![2, 3], vec![1.0; 6]).unwrap();
        let z = DenseTensor::zeros(vec![2, 3]).unwrap();
        assert_eq!(inner(&t, &z).unwrap(), 0.0);
        assert!((t.fro_norm() - 6.0_f64.sqrt()).abs() < 1e-15);
        let w = DenseTensor::zeros(vec![3, 2]).unwrap();
        assert!(inner(&t, &w).is_err());
    }

    #[test]
    fn cauchy_schwarz_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let t = random_tensor(vec![3, 4, 2], &mut rng);
            let w = random_tensor(vec![3, 4, 2], &mut rng);
            let lhs = inner(&t, &w).unwrap().abs();
            let rhs = t.fro_norm() * w.fro_norm();
            assert!(lhs <= rhs + 1e-12);
        }
    }
}
