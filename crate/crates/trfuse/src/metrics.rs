//! Reconstruction quality indices and the class-signature analysis.
//!
//! All metrics treat an order-3 tensor as `rows x cols x bands` with the
//! spectral axis last. PSNR and SSIM average per band; SAM averages over
//! spatial pixels.

use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::{svd_thin, CGConfig};
use crate::ring::TRCores;
use crate::solver::fit_tr_multi;
use crate::tensor::{DenseTensor, Matrix};

/// The five quality indices for a reconstruction against a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr: f64,
    pub rmse: f64,
    pub ergas: f64,
    pub sam: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub const CSV_HEADER: &'static str = "psnr,rmse,ergas,sam,ssim";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.psnr, self.rmse, self.ergas, self.sam, self.ssim
        )
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "psnr: {:.4}", self.psnr)?;
        writeln!(f, "rmse: {:.6}", self.rmse)?;
        writeln!(f, "ergas: {:.6}", self.ergas)?;
        writeln!(f, "sam: {:.6}", self.sam)?;
        write!(f, "ssim: {:.6}", self.ssim)
    }
}

fn check_same_shape(a: &DenseTensor, b: &DenseTensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "metric on shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn check_cube(t: &DenseTensor) -> Result<(usize, usize, usize)> {
    if t.order() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "band metrics need an order-3 tensor, got order {}",
            t.order()
        )));
    }
    Ok((t.shape()[0], t.shape()[1], t.shape()[2]))
}

/// Root mean square error over all elements.
pub fn rmse(x_hat: &DenseTensor, x_ref: &DenseTensor) -> Result<f64> {
    check_same_shape(x_hat, x_ref)?;
    let sum: f64 = x_hat
        .data()
        .iter()
        .zip(x_ref.data().iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok((sum / x_hat.len() as f64).sqrt())
}

pub const PSNR_CAP_DB: f64 = 100.0;

/// Mean over bands of `10*log10(peak^2 / mse_band)`; exact bands contribute
/// the cap value.
pub fn psnr(x_hat: &DenseTensor, x_ref: &DenseTensor, peak: f64) -> Result<f64> {
    check_same_shape(x_hat, x_ref)?;
    let (rows, cols, bands) = check_cube(x_ref)?;
    let px = (rows * cols) as f64;
    let mut total = 0.0;
    for k in 0..bands {
        let mut mse = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let d = x_hat.get(&[i, j, k])? - x_ref.get(&[i, j, k])?;
                mse += d * d;
            }
        }
        mse /= px;
        total += if mse == 0.0 {
            PSNR_CAP_DB
        } else {
            10.0 * (peak * peak / mse).log10()
        };
    }
    Ok(total / bands as f64)
}

/// Relative dimensionless global error in synthesis:
/// `100/ratio * sqrt(mean_bands((rmse_b / mean_b)^2))` with `mean_b` the
/// reference band mean and `ratio` the spatial downsampling factor.
pub fn ergas(x_hat: &DenseTensor, x_ref: &DenseTensor, ratio: f64) -> Result<f64> {
    check_same_shape(x_hat, x_ref)?;
    let (rows, cols, bands) = check_cube(x_ref)?;
    let px = (rows * cols) as f64;
    let mut acc = 0.0;
    for k in 0..bands {
        let mut mse = 0.0;
        let mut mean = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let r = x_ref.get(&[i, j, k])?;
                let d = x_hat.get(&[i, j, k])? - r;
                mse += d * d;
                mean += r;
            }
        }
        mean /= px;
        if mean == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "band {k} of the reference has zero mean"
            )));
        }
        acc += mse / px / (mean * mean);
    }
    Ok(100.0 / ratio * (acc / bands as f64).sqrt())
}

/// Spectral angle mapper: mean over pixels of the angle between estimated and
/// reference spectra, in degrees. Pixels with a zero spectrum on either side
/// are excluded.
pub fn sam(x_hat: &DenseTensor, x_ref: &DenseTensor) -> Result<f64> {
    check_same_shape(x_hat, x_ref)?;
    let (rows, cols, bands) = check_cube(x_ref)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..rows {
        for j in 0..cols {
            let mut uu = 0.0;
            let mut vv = 0.0;
            let mut uv = 0.0;
            for k in 0..bands {
                let u = x_hat.get(&[i, j, k])?;
                let v = x_ref.get(&[i, j, k])?;
                uu += u * u;
                vv += v * v;
                uv += u * v;
            }
            if uu == 0.0 || vv == 0.0 {
                continue;
            }
            // bit-identical spectra must score exactly zero; the rounded
            // norm product would otherwise put cos just below one
            if uv != uu || uv != vv {
                let c = (uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0);
                total += c.acos();
            }
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::InvalidArgument(
            "all pixels have degenerate spectra".into(),
        ));
    }
    Ok(total / counted as f64 * 180.0 / std::f64::consts::PI)
}

pub const SSIM_WINDOW: usize = 8;

/// Single-scale SSIM with an 8x8 uniform sliding window, averaged over
/// windows and then over bands. `c1 = (0.01*peak)^2`, `c2 = (0.03*peak)^2`.
pub fn ssim(x_hat: &DenseTensor, x_ref: &DenseTensor, peak: f64) -> Result<f64> {
    check_same_shape(x_hat, x_ref)?;
    let (rows, cols, bands) = check_cube(x_ref)?;
    let w = SSIM_WINDOW;
    if rows < w || cols < w {
        return Err(Error::InvalidArgument(format!(
            "image {rows}x{cols} smaller than the {w}x{w} ssim window"
        )));
    }
    let c1 = (0.01 * peak) * (0.01 * peak);
    let c2 = (0.03 * peak) * (0.03 * peak);
    let wn = (w * w) as f64;
    let mut band_total = 0.0;
    for k in 0..bands {
        let mut win_total = 0.0;
        let mut windows = 0usize;
        for i0 in 0..=(rows - w) {
            for j0 in 0..=(cols - w) {
                let mut mx = 0.0;
                let mut my = 0.0;
                for i in i0..i0 + w {
                    for j in j0..j0 + w {
                        mx += x_hat.get(&[i, j, k])?;
                        my += x_ref.get(&[i, j, k])?;
                    }
                }
                mx /= wn;
                my /= wn;
                let mut vx = 0.0;
                let mut vy = 0.0;
                let mut cov = 0.0;
                for i in i0..i0 + w {
                    for j in j0..j0 + w {
                        let dx = x_hat.get(&[i, j, k])? - mx;
                        let dy = x_ref.get(&[i, j, k])? - my;
                        vx += dx * dx;
                        vy += dy * dy;
                        cov += dx * dy;
                    }
                }
                vx /= wn;
                vy /= wn;
                cov /= wn;
                win_total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                windows += 1;
            }
        }
        band_total += win_total / windows as f64;
    }
    Ok(band_total / bands as f64)
}

/// Computes all five indices at once.
pub fn evaluate(
    x_hat: &DenseTensor,
    x_ref: &DenseTensor,
    ratio: f64,
    peak: f64,
) -> Result<QualityReport> {
    Ok(QualityReport {
        psnr: psnr(x_hat, x_ref, peak)?,
        rmse: rmse(x_hat, x_ref)?,
        ergas: ergas(x_hat, x_ref, ratio)?,
        sam: sam(x_hat, x_ref)?,
        ssim: ssim(x_hat, x_ref, peak)?,
    })
}

/// Principal angles (degrees, ascending) between the column spans of `a`
/// and `b`.
pub fn principal_angles_deg(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    let qa = orthonormal_basis(a)?;
    let qb = orthonormal_basis(b)?;
    let overlap = qa.t().dot(&qb);
    let s = svd_thin(&overlap)?.s;
    Ok(s.iter()
        .map(|&c| c.clamp(-1.0, 1.0).acos() * 180.0 / std::f64::consts::PI)
        .collect())
}

fn orthonormal_basis(a: &Matrix) -> Result<Matrix> {
    let svd = svd_thin(a)?;
    let s_max = svd.s.first().copied().unwrap_or(0.0);
    if s_max == 0.0 {
        return Err(Error::InvalidArgument("zero basis matrix".into()));
    }
    let rank = svd.s.iter().filter(|&&x| x > 1e-12 * s_max).count();
    Ok(svd.u.slice(ndarray::s![.., ..rank]).to_owned())
}

/// Per-class comparison of ring-extracted spectral signatures against
/// SVD references.
#[derive(Debug, Clone)]
pub struct SignatureReport {
    pub classes: Vec<ClassAngles>,
    /// Relative reconstruction error of the underlying ring fit.
    pub fit_error: f64,
}

#[derive(Debug, Clone)]
pub struct ClassAngles {
    pub label: usize,
    /// Spectral-core slice this class predominantly uses.
    pub core_slice: usize,
    /// How the class weights the spectral-core slices (unit vector).
    pub slice_weights: Vec<f64>,
    /// Principal angles (degrees, ascending) between the ring subspace and
    /// the SVD reference subspace.
    pub angles_deg: Vec<f64>,
}

impl fmt::Display for SignatureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ring fit relative error: {:.3e}", self.fit_error)?;
        for c in &self.classes {
            let angles: Vec<String> = c.angles_deg.iter().map(|a| format!("{a:.3}")).collect();
            writeln!(
                f,
                "class {} (core slice {}): principal angles [{}] deg",
                c.label,
                c.core_slice,
                angles.join(", ")
            )?;
        }
        Ok(())
    }
}

/// Arranges `pixels` (one spectrum per row) into a square spatial grid,
/// fits a tensor ring, and compares each spectral-core slice subspace with
/// the per-class SVD reference subspaces via principal angles.
///
/// Requires equal pixel counts per class, a square pixel count, and the
/// spectral rank `ranks.2` equal to the number of classes.
pub fn signature_analysis(
    pixels: &Matrix,
    labels: &[usize],
    ranks: (usize, usize, usize),
    seed: u64,
) -> Result<SignatureReport> {
    let p = pixels.nrows();
    let bands = pixels.ncols();
    if labels.len() != p {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} pixels",
            labels.len(),
            p
        )));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return Err(Error::InvalidArgument("no classes".into()));
    }
    let per_class = p / classes.len();
    for &c in &classes {
        let count = labels.iter().filter(|&&l| l == c).count();
        if count != per_class || per_class * classes.len() != p {
            return Err(Error::InvalidArgument(format!(
                "class {c} has {count} pixels, expected equal counts of {per_class}"
            )));
        }
    }
    let side = (p as f64).sqrt().round() as usize;
    if side * side != p {
        return Err(Error::InvalidArgument(format!(
            "{p} pixels cannot be arranged into a square grid"
        )));
    }
    let (r1, r2, r3) = ranks;
    if r3 != classes.len() {
        return Err(Error::InvalidArgument(format!(
            "spectral rank {r3} must match the class count {}",
            classes.len()
        )));
    }

    let cube = DenseTensor::from_fn(vec![side, side, bands], |ix| {
        pixels[[ix[0] * side + ix[1], ix[2]]]
    })?;
    let ring = fit_tr_multi(&cube, &[r1, r2, r3], 200, 6, seed, &CGConfig::default())?;
    let fit_error = crate::ring::tr_reconstruct(&ring)?.sub(&cube)?.fro_norm()
        / cube.fro_norm().max(1e-300);

    // per-pixel coefficient matrices W = G1(i)*G2(j): pixel spectrum equals
    // sum_{r1,r3} W[r1,r3] * fiber(r3, r1)
    let g1 = ring.core(1)?;
    let g2 = ring.core(2)?;
    let slice1: Vec<Matrix> = (0..side)
        .map(|i| Matrix::from_shape_fn((r1, r2), |(a, b)| g1.get(&[a, i, b]).unwrap()))
        .collect();
    let slice2: Vec<Matrix> = (0..side)
        .map(|j| Matrix::from_shape_fn((r2, r3), |(a, b)| g2.get(&[a, j, b]).unwrap()))
        .collect();

    let mut classes_out = Vec::with_capacity(classes.len());
    for &c in &classes {
        // slice-usage Gram of this class; bond-gauge mixing rotates it, and
        // its top eigenvector recovers the slice combination the class uses
        let mut usage = Matrix::zeros((r3, r3));
        for q in (0..p).filter(|&q| labels[q] == c) {
            let w = slice1[q / side].dot(&slice2[q % side]);
            usage = usage + w.t().dot(&w);
        }
        let u = svd_thin(&usage)?.u.column(0).to_owned();
        let tr_basis = weighted_slice_basis(&ring, u.as_slice().unwrap())?;

        // reference subspace: top right-singular vectors of the class pixels
        let members: Vec<usize> = (0..p).filter(|&q| labels[q] == c).collect();
        let class_mat =
            Matrix::from_shape_fn((members.len(), bands), |(i, j)| pixels[[members[i], j]]);
        let svd = svd_thin(&class_mat)?;
        let take = r1.min(svd.v.ncols());
        let ref_basis = svd.v.slice(ndarray::s![.., ..take]).to_owned();

        let angles_deg = principal_angles_deg(&tr_basis, &ref_basis)?;
        let core_slice = (0..r3)
            .max_by(|&a, &b| (u[a] * u[a]).partial_cmp(&(u[b] * u[b])).unwrap())
            .unwrap_or(0);
        classes_out.push(ClassAngles {
            label: c,
            core_slice,
            slice_weights: u.to_vec(),
            angles_deg,
        });
    }
    Ok(SignatureReport {
        classes: classes_out,
        fit_error,
    })
}

/// `B x R1` fiber matrix of the spectral core with the leading slice axis
/// contracted against `weights`.
fn weighted_slice_basis(ring: &TRCores, weights: &[f64]) -> Result<Matrix> {
    let g3 = ring.core(3)?;
    let (r3, bands, r1) = (g3.shape()[0], g3.shape()[1], g3.shape()[2]);
    if weights.len() != r3 {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} slices",
            weights.len(),
            r3
        )));
    }
    Ok(Matrix::from_shape_fn((bands, r1), |(b, r)| {
        (0..r3).map(|s| weights[s] * g3.get(&[s, b, r]).unwrap()).sum()
    }))
}
