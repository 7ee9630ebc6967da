//! Spatial and spectral degradation operators and the simulation pipeline
//! that derives an (HSI, MSI) observation pair from a high-resolution cube.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Spatial operators `p1` (rows) and `p2` (columns) plus the spectral
/// operator `p3`, together with their construction parameters.
#[derive(Debug, Clone)]
pub struct DegradationModel {
    pub p1: Matrix,
    pub p2: Matrix,
    pub p3: Matrix,
    pub spatial_factor: usize,
    pub kernel_size: usize,
    /// Half-open 0-based band ranges backing the default `p3`; empty when
    /// `p3` was loaded from an explicit response file.
    pub band_groups: Vec<(usize, usize)>,
}

impl DegradationModel {
    /// Builds the model for an `m_full x n_full x b_full` cube with averaged
    /// band groups for the spectral side.
    pub fn build(
        m_full: usize,
        n_full: usize,
        b_full: usize,
        factor: usize,
        kernel_size: usize,
        band_groups: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let p3 = build_spectral_operator(b_full, &band_groups)?;
        Ok(Self {
            p1: build_spatial_operator(m_full, factor, kernel_size)?,
            p2: build_spatial_operator(n_full, factor, kernel_size)?,
            p3,
            spatial_factor: factor,
            kernel_size,
            band_groups,
        })
    }

    /// Same as [`DegradationModel::build`] but with an explicit spectral
    /// response matrix instead of band averaging.
    pub fn with_spectral_matrix(
        m_full: usize,
        n_full: usize,
        factor: usize,
        kernel_size: usize,
        p3: Matrix,
    ) -> Result<Self> {
        Ok(Self {
            p1: build_spatial_operator(m_full, factor, kernel_size)?,
            p2: build_spatial_operator(n_full, factor, kernel_size)?,
            p3,
            spatial_factor: factor,
            kernel_size,
            band_groups: Vec::new(),
        })
    }

    pub fn hr_shape_consistent(&self, shape: &[usize]) -> bool {
        shape.len() == 3
            && shape[0] == self.p1.ncols()
            && shape[1] == self.p2.ncols()
            && shape[2] == self.p3.ncols()
    }
}

/// Noise and scaling parameters for simulation. `snr_db` may be
/// `f64::INFINITY` for a noise-free pair.
#[derive(Debug, Clone, Copy)]
pub struct SimulationConfig {
    pub snr_db: f64,
    pub seed: u64,
    pub scale_max: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            snr_db: 30.0,
            seed: 0,
            scale_max: 255.0,
        }
    }
}

/// Averaging blur-and-downsample operator: row `r` averages `kernel_size`
/// consecutive samples centered on the r-th downsample cell, clamped at the
/// boundaries and renormalized so every row sums to one.
pub fn build_spatial_operator(full_dim: usize, factor: usize, kernel_size: usize) -> Result<Matrix> {
    if factor == 0 || full_dim == 0 {
        return Err(Error::InvalidArgument("factor and dim must be positive".into()));
    }
    if !full_dim.is_multiple_of(factor) {
        return Err(Error::ShapeMismatch(format!(
            "dimension {full_dim} not divisible by factor {factor}"
        )));
    }
    if kernel_size < factor {
        return Err(Error::InvalidArgument(format!(
            "kernel size {kernel_size} smaller than factor {factor}"
        )));
    }
    let low_dim = full_dim / factor;
    let mut p = Matrix::zeros((low_dim, full_dim));
    let lead = (kernel_size - factor) / 2;
    for r in 0..low_dim {
        let start = (r * factor) as isize - lead as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + kernel_size as isize) as usize).min(full_dim);
        let w = 1.0 / (hi - lo) as f64;
        for c in lo..hi {
            p[[r, c]] = w;
        }
    }
    Ok(p)
}

/// Band-averaging spectral operator: row `g` is `1/|group g|` on its bands.
/// Groups are half-open 0-based ranges and must be disjoint and non-empty.
pub fn build_spectral_operator(b_full: usize, groups: &[(usize, usize)]) -> Result<Matrix> {
    if groups.is_empty() {
        return Err(Error::InvalidArgument("at least one band group required".into()));
    }
    let mut seen = vec![false; b_full];
    for &(lo, hi) in groups {
        if lo >= hi || hi > b_full {
            return Err(Error::InvalidArgument(format!(
                "band group {lo}..{hi} invalid for {b_full} bands"
            )));
        }
        for (k, flag) in seen.iter_mut().enumerate().take(hi).skip(lo) {
            if *flag {
                return Err(Error::InvalidArgument(format!(
                    "band {k} appears in more than one group"
                )));
            }
            *flag = true;
        }
    }
    let mut p = Matrix::zeros((groups.len(), b_full));
    for (g, &(lo, hi)) in groups.iter().enumerate() {
        let w = 1.0 / (hi - lo) as f64;
        for k in lo..hi {
            p[[g, k]] = w;
        }
    }
    Ok(p)
}

/// Splits `b_full` bands into `b_out` contiguous groups of near-equal size,
/// larger groups first.
pub fn equal_band_groups(b_full: usize, b_out: usize) -> Result<Vec<(usize, usize)>> {
    if b_out == 0 || b_out > b_full {
        return Err(Error::InvalidArgument(format!(
            "cannot split {b_full} bands into {b_out} groups"
        )));
    }
    let base = b_full / b_out;
    let extra = b_full % b_out;
    let mut groups = Vec::with_capacity(b_out);
    let mut lo = 0;
    for g in 0..b_out {
        let size = base + usize::from(g < extra);
        groups.push((lo, lo + size));
        lo += size;
    }
    Ok(groups)
}

/// Reads a `b x B` spectral response matrix from whitespace-separated text.
pub fn load_spectral_operator(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    parse_spectral_operator(&text)
}

pub fn parse_spectral_operator(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: bad number {tok:?}", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Format(format!(
                    "line {}: expected {} entries, got {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("spectral response file has no rows".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(Matrix::from_shape_fn((r, c), |(i, j)| rows[i][j]))
}

pub fn format_spectral_operator(p: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..p.nrows() {
        let row: Vec<String> = (0..p.ncols()).map(|j| format!("{:?}", p[[i, j]])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Forms the observation pair: `y = x ×₁ p1 ×₂ p2` and `z = x ×₃ p3`.
pub fn degrade(x: &DenseTensor, model: &DegradationModel) -> Result<(DenseTensor, DenseTensor)> {
    if !model.hr_shape_consistent(x.shape()) {
        return Err(Error::ShapeMismatch(format!(
            "tensor {:?} inconsistent with operators ({}x{}, {}x{}, {}x{})",
            x.shape(),
            model.p1.nrows(),
            model.p1.ncols(),
            model.p2.nrows(),
            model.p2.ncols(),
            model.p3.nrows(),
            model.p3.ncols()
        )));
    }
    let y = x.mode_product(&model.p1, 1)?.mode_product(&model.p2, 2)?;
    let z = x.mode_product(&model.p3, 3)?;
    Ok((y, z))
}

/// Noise standard deviation implied by the mean-signal-power SNR definition:
/// `sigma^2 = mean(t^2) * 10^(-snr/10)`.
pub fn noise_sigma(t: &DenseTensor, snr_db: f64) -> f64 {
    if snr_db.is_infinite() {
        return 0.0;
    }
    let power = t.data().iter().map(|v| v * v).sum::<f64>() / t.len() as f64;
    (power * 10f64.powf(-snr_db / 10.0)).sqrt()
}

/// Adds i.i.d. Gaussian noise at the requested SNR (defined on mean signal
/// power). Infinite SNR returns an exact copy; output is deterministic for a
/// fixed seed.
pub fn add_noise(t: &DenseTensor, cfg: &SimulationConfig) -> DenseTensor {
    if cfg.snr_db.is_infinite() {
        return t.clone();
    }
    let sigma = noise_sigma(t, cfg.snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = t.clone();
    for v in out.data_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * e;
    }
    out
}

/// Affine rescale mapping the minimum to 0 and the maximum to `max_value`.
pub fn rescale_to(t: &DenseTensor, max_value: f64) -> Result<DenseTensor> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in t.data() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::InvalidArgument(
            "cannot rescale a constant tensor".into(),
        ));
    }
    let s = max_value / (hi - lo);
    let mut out = t.clone();
    for v in out.data_mut() {
        *v = (*v - lo) * s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{tr_init, tr_reconstruct, TRCores};
    use crate::tensor::{kron, mat_fro_norm};
    use rand::prelude::*;

    #[test]
    fn spatial_operator_non_overlapping_average() {
        let p = build_spatial_operator(4, 2, 2).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(p.row(1).to_vec(), vec![0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn spatial_operator_size8_kernel() {
        let p = build_spatial_operator(256, 4, 8).unwrap();
        assert_eq!(p.dim(), (64, 256));
        // interior rows carry 8 taps of 1/8
        for r in 1..63 {
            let taps: Vec<f64> = p.row(r).iter().cloned().filter(|&v| v != 0.0).collect();
            assert_eq!(taps.len(), 8);
            assert!(taps.iter().all(|&v| (v - 0.125).abs() < 1e-15));
        }
        // boundary rows are clamped and renormalized
        for r in 0..64 {
            let sum: f64 = p.row(r).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spatial_operator_preserves_constants() {
        let p = build_spatial_operator(12, 3, 5).unwrap();
        let ones = Matrix::from_elem((12, 1), 3.7);
        let out = p.dot(&ones);
        for &v in out.iter() {
            assert!((v - 3.7).abs() < 1e-12);
        }
        assert!(build_spatial_operator(10, 3, 3).is_err());
        assert!(build_spatial_operator(10, 5, 4).is_err());
    }

    #[test]
    fn spectral_operator_small_and_equal_groups() {
        let p = build_spectral_operator(4, &[(0, 2), (2, 4)]).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(p.row(1).to_vec(), vec![0.0, 0.0, 0.5, 0.5]);

        let groups = equal_band_groups(90, 4).unwrap();
        assert_eq!(groups, vec![(0, 23), (23, 46), (46, 68), (68, 90)]);
        let p = build_spectral_operator(90, &groups).unwrap();
        assert_eq!(p.dim(), (4, 90));
        for r in 0..4 {
            assert!((p.row(r).sum() - 1.0).abs() < 1e-12);
            assert!(p.row(r).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn spectral_operator_rejects_bad_groups() {
        assert!(build_spectral_operator(4, &[(0, 2), (1, 4)]).is_err());
        assert!(build_spectral_operator(4, &[(2, 2)]).is_err());
        assert!(build_spectral_operator(4, &[(0, 5)]).is_err());
        assert!(build_spectral_operator(4, &[]).is_err());
    }

    #[test]
    fn spectral_file_round_trip() {
        let p = Matrix::from_shape_fn((2, 5), |(i, j)| (i * 5 + j) as f64 / 7.0);
        let text = format_spectral_operator(&p);
        let back = parse_spectral_operator(&text).unwrap();
        assert_eq!(p, back);
        assert!(parse_spectral_operator("1 2\n3\n").is_err());
        assert!(parse_spectral_operator("").is_err());
    }

    #[test]
    fn degrade_identity_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DenseTensor::from_fn(vec![4, 4, 3], |_| rng.gen_range(0.0..1.0)).unwrap();
        let model = DegradationModel {
            p1: Matrix::eye(4),
            p2: Matrix::eye(4),
            p3: Matrix::eye(3),
            spatial_factor: 1,
            kernel_size: 1,
            band_groups: (0..3).map(|k| (k, k + 1)).collect(),
        };
        let (y, z) = degrade(&x, &model).unwrap();
        assert_eq!(y, x);
        assert_eq!(z, x);
    }

    #[test]
    fn degrade_constant_tensor_stays_constant() {
        let x = DenseTensor::from_fn(vec![8, 8, 6], |_| 2.5).unwrap();
        let model =
            DegradationModel::build(8, 8, 6, 2, 2, equal_band_groups(6, 2).unwrap()).unwrap();
        let (y, z) = degrade(&x, &model).unwrap();
        assert_eq!(y.shape(), &[4, 4, 6]);
        assert_eq!(z.shape(), &[8, 8, 2]);
        for &v in y.data().iter().chain(z.data()) {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn degrade_rejects_mismatched_shape() {
        let x = DenseTensor::zeros(vec![8, 8, 5]).unwrap();
        let model =
            DegradationModel::build(8, 8, 6, 2, 2, equal_band_groups(6, 2).unwrap()).unwrap();
        assert!(degrade(&x, &model).is_err());
    }

    #[test]
    fn tensor_path_matches_core_path_on_random_ring() {
        // central coupled-model consistency: degrading the full tensor equals
        // degrading the cores and reconstructing
        let ring = tr_init(&[8, 8, 6], &[2, 6, 2], 7).unwrap();
        let x = tr_reconstruct(&ring).unwrap();
        let model =
            DegradationModel::build(8, 8, 6, 2, 4, equal_band_groups(6, 2).unwrap()).unwrap();
        let (y, z) = degrade(&x, &model).unwrap();

        let g1p = ring.cores()[0].mode2_ttm(&model.p1).unwrap();
        let g2p = ring.cores()[1].mode2_ttm(&model.p2).unwrap();
        let g3p = ring.cores()[2].mode2_ttm(&model.p3).unwrap();
        let y_cores = tr_reconstruct(
            &TRCores::new(vec![g1p, g2p, ring.cores()[2].clone()]).unwrap(),
        )
        .unwrap();
        let z_cores = tr_reconstruct(
            &TRCores::new(vec![ring.cores()[0].clone(), ring.cores()[1].clone(), g3p]).unwrap(),
        )
        .unwrap();

        let ey = y.sub(&y_cores).unwrap().fro_norm() / y.fro_norm();
        let ez = z.sub(&z_cores).unwrap().fro_norm() / z.fro_norm();
        assert!(ey < 1e-10, "hsi path mismatch {ey}");
        assert!(ez < 1e-10, "msi path mismatch {ez}");
    }

    #[test]
    fn kron_assembled_operator_matches_mode_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DenseTensor::from_fn(vec![8, 6, 4], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let p1 = build_spatial_operator(8, 2, 3).unwrap();
        let p2 = build_spatial_operator(6, 2, 2).unwrap();
        let y = x.mode_product(&p1, 1).unwrap().mode_product(&p2, 2).unwrap();
        let lhs = y.block_unfold(2).unwrap();
        let rhs = kron(&p2, &p1).dot(&x.block_unfold(2).unwrap());
        assert!(mat_fro_norm(&(&lhs - &rhs)) / mat_fro_norm(&lhs) < 1e-10);
    }

    #[test]
    fn noise_infinite_snr_is_identity() {
        let t = DenseTensor::from_fn(vec![3, 3], |ix| (ix[0] + ix[1]) as f64).unwrap();
        let cfg = SimulationConfig {
            snr_db: f64::INFINITY,
            seed: 5,
            scale_max: 255.0,
        };
        assert_eq!(add_noise(&t, &cfg), t);
    }

    #[test]
    fn noise_sigma_matches_definition() {
        // unit-RMS signal at 20 dB gives sigma 0.1
        let t = DenseTensor::from_fn(vec![64, 64, 8], |ix| {
            if (ix[0] + ix[1] + ix[2]) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .unwrap();
        assert!((noise_sigma(&t, 20.0) - 0.1).abs() < 1e-15);
        assert_eq!(noise_sigma(&t, f64::INFINITY), 0.0);
        let cfg = SimulationConfig {
            snr_db: 20.0,
            seed: 11,
            scale_max: 255.0,
        };
        let noisy = add_noise(&t, &cfg);
        let eps = noisy.sub(&t).unwrap();
        let noise_power = eps.data().iter().map(|v| v * v).sum::<f64>() / eps.len() as f64;
        // oracle: recompute the empirical SNR from the drawn noise
        let measured = 10.0 * (1.0 / noise_power).log10();
        assert!((measured - 20.0).abs() < 0.5, "snr {measured}");
    }

    #[test]
    fn noise_deterministic_per_seed() {
        let t = DenseTensor::from_fn(vec![4, 5], |ix| ix[0] as f64 - ix[1] as f64).unwrap();
        let cfg = SimulationConfig {
            snr_db: 25.0,
            seed: 3,
            scale_max: 255.0,
        };
        assert_eq!(add_noise(&t, &cfg), add_noise(&t, &cfg));
        let other = SimulationConfig { seed: 4, ..cfg };
        assert_ne!(add_noise(&t, &cfg), add_noise(&t, &other));
    }

    #[test]
    fn rescale_behaviour() {
        let t = DenseTensor::new(vec![2, 2], vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let s = rescale_to(&t, 255.0).unwrap();
        assert_eq!(s.data(), &[0.0, 63.75, 127.5, 255.0]);
        let again = rescale_to(&s, 255.0).unwrap();
        for (a, b) in again.data().iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r = DenseTensor::from_fn(vec![5, 7], |_| rng.gen_range(-4.0..9.0)).unwrap();
        let rs = rescale_to(&r, 255.0).unwrap();
        let lo = rs.data().iter().cloned().fold(f64::MAX, f64::min);
        let hi = rs.data().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 255.0);
        assert!(rescale_to(&DenseTensor::zeros(vec![2, 2]).unwrap(), 255.0).is_err());
    }
}
