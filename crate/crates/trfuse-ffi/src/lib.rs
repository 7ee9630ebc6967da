//! C ABI for the fusion library: opaque handles, integer status codes, and
//! a thread-local last-error message. The header is generated by cbindgen
//! into `include/trfuse.h`.
//!
//! Ownership rules: every `*_create`/`*_read`/`trf_fuse`-style function that
//! yields a handle transfers ownership to the caller, who must release it
//! with the matching `*_free`. Pointers returned by accessors borrow from
//! the handle and die with it.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use trfuse::degradation::{
    add_noise, degrade, equal_band_groups, rescale_to, DegradationModel, SimulationConfig,
};
use trfuse::error::Error;
use trfuse::io::{read_tensor, write_tensor};
use trfuse::metrics::evaluate;
use trfuse::numerics::CGConfig;
use trfuse::solver::{solve, FusionMode, FusionProblem, SolverConfig};
use trfuse::tensor::DenseTensor;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    IoError = 4,
    FormatError = 5,
    NumericalError = 6,
    Panic = 7,
}

/// Opaque dense tensor handle.
pub struct TrfTensor(DenseTensor);

/// Opaque degradation model handle.
pub struct TrfModel(DegradationModel);

/// Quality indices of a reconstruction against a reference.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TrfQuality {
    pub psnr: f64,
    pub rmse: f64,
    pub ergas: f64,
    pub sam: f64,
    pub ssim: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> TrfStatus {
    match err {
        Error::InvalidArgument(_) => TrfStatus::InvalidArgument,
        Error::ShapeMismatch(_) | Error::ModeOutOfRange { .. } => TrfStatus::ShapeMismatch,
        Error::Io(_) => TrfStatus::IoError,
        Error::Format(_) => TrfStatus::FormatError,
        Error::Numerical(_) => TrfStatus::NumericalError,
    }
}

fn run<F: FnOnce() -> Result<TrfStatus, Error>>(f: F) -> TrfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => {
            let status = status_of(&err);
            set_error(err.to_string());
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TrfStatus::Panic
        }
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, Error> {
    if ptr.is_null() {
        return Err(Error::InvalidArgument("null path".into()));
    }
    let s = unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(Path::new(s).to_path_buf())
}

/// Message describing the most recent failure on this thread, or null when
/// no failure is recorded. The pointer stays valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn trf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a tensor from `order` extents and a densely packed payload
/// (first index slowest). The data is copied.
///
/// # Safety
/// `dims` must point to `order` values, `data` to their product, and `out`
/// must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn trf_tensor_create(
    order: usize,
    dims: *const usize,
    data: *const f64,
    out: *mut *mut TrfTensor,
) -> TrfStatus {
    if dims.is_null() || data.is_null() || out.is_null() {
        set_error("null argument".into());
        return TrfStatus::NullArgument;
    }
    run(|| {
        let shape = unsafe { std::slice::from_raw_parts(dims, order) }.to_vec();
        let len: usize = shape.iter().product();
        let payload = unsafe { std::slice::from_raw_parts(data, len) }.to_vec();
        let t = DenseTensor::new(shape, payload)?;
        unsafe { *out = Box::into_raw(Box::new(TrfTensor(t))) };
        Ok(TrfStatus::Ok)
    })
}

/// Reads an HTEN file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn trf_tensor_read(
    path: *const c_char,
    out: *mut *mut TrfTensor,
) -> TrfStatus {
    if out.is_null() {
        set_error("null output pointer".into());
        return TrfStatus::NullArgument;
    }
    run(|| {
        let t = read_tensor(&unsafe { path_from(path) }?)?;
        unsafe { *out = Box::into_raw(Box::new(TrfTensor(t))) };
        Ok(TrfStatus::Ok)
    })
}

/// Writes an HTEN file (atomically).
///
/// # Safety
/// `path` must be NUL-terminated; `t` must be a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn trf_tensor_write(path: *const c_char, t: *const TrfTensor) -> TrfStatus {
    if t.is_null() {
        set_error("null tensor".into());
        return TrfStatus::NullArgument;
    }
    run(|| {
        write_tensor(&unsafe { path_from(path) }?, unsafe { &(*t).0 })?;
        Ok(TrfStatus::Ok)
    })
}

/// Number of modes, or 0 for a null handle.
///
/// # Safety
/// `t` must be a live tensor handle or null.
#[no_mangle]
pub unsafe extern "C" fn trf_tensor_order(t: *const TrfTensor) -> usize {
    if t.is_null() {
        return 0;
    }
    unsafe { &(*t).0 }.order()
}

/// Copies the extents into `dims` (which must hold `trf_tensor_order` many).
///
/// # Safety
/// `t` must be live; `dims` must point to enough writable space.
#[no_mangle]
pub unsafe extern "C" fn trf_tensor_dims(t: *const TrfTensor, dims: *mut usize) -> TrfStatus {
    if t.is_null() || dims.is_null() {
        set_error("null argument".into());
        return TrfStatus::NullArgument;
    }
    let shape = unsafe { &(*t).0 }.shape();
    for (k, &d) in shape.iter().enumerate() {
        unsafe { *dims.add(k) = d };
    }
    TrfStatus::Ok
}

/// Total element count.
///
/// # Safety
/// `t` must be a live tensor handle or null.
#[no_mangle]
pub unsafe extern "C" fn trf_tensor_len(t: *const TrfTensor) -> usize {
    if t.is_null() {
        return 0;
    }
    unsafe { &(*t).0 }.len()
}

/// Borrowed pointer to the payload in canonical order; valid while the
/// handle lives.
///
/// # Safety
/// `t` must be a live tensor handle or null.
#[no_mangle]
pub unsafe extern "C" fn trf_tensor_data(t: *const TrfTensor) -> *const f64 {
    if t.is_null() {
        return ptr::null();
    }
    unsafe { &(*t).0 }.data().as_ptr()
}

/// Releases a tensor handle; null is ignored.
///
/// # Safety
/// `t` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn trf_tensor_free(t: *mut TrfTensor) {
    if !t.is_null() {
        drop(unsafe { Box::from_raw(t) });
    }
}

/// Builds a degradation model: averaging blur/downsample at `factor` with
/// `kernel_size` taps on an `m_full x n_full` grid, and `msi_bands` equal
/// contiguous band-average groups over `b_full` bands.
///
/// # Safety
/// `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn trf_model_build(
    m_full: usize,
    n_full: usize,
    b_full: usize,
    factor: usize,
    kernel_size: usize,
    msi_bands: usize,
    out: *mut *mut TrfModel,
) -> TrfStatus {
    if out.is_null() {
        set_error("null output pointer".into());
        return TrfStatus::NullArgument;
    }
    run(|| {
        let model = DegradationModel::build(
            m_full,
            n_full,
            b_full,
            factor,
            kernel_size,
            equal_band_groups(b_full, msi_bands)?,
        )?;
        unsafe { *out = Box::into_raw(Box::new(TrfModel(model))) };
        Ok(TrfStatus::Ok)
    })
}

/// Releases a model handle; null is ignored.
///
/// # Safety
/// `m` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn trf_model_free(m: *mut TrfModel) {
    if !m.is_null() {
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Applies the model: `out_y` gets the spatially degraded cube, `out_z` the
/// spectrally degraded one.
///
/// # Safety
/// All handles must be live; output pointers must be valid destinations.
#[no_mangle]
pub unsafe extern "C" fn trf_degrade(
    x: *const TrfTensor,
    model: *const TrfModel,
    out_y: *mut *mut TrfTensor,
    out_z: *mut *mut TrfTensor,
) -> TrfStatus {
    if x.is_null() || model.is_null() || out_y.is_null() || out_z.is_null() {
        set_error("null argument".into());
        return TrfStatus::NullArgument;
    }
    run(|| {
        let (y, z) = degrade(unsafe { &(*x).0 }, unsafe { &(*model).0 })?;
        unsafe {
            *out_y = Box::into_raw(Box::new(TrfTensor(y)));
            *out_z = Box::into_raw(Box::new(TrfTensor(z)));
        }
        Ok(TrfStatus::Ok)
    })
}

/// Adds seeded Gaussian noise at `snr_db` (pass INFINITY for a copy).
///
/// # Safety
/// `t` must be live; `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn trf_add_noise(
    t: *const TrfTensor,
    snr_db: f64,
    seed: u64,
    out: *mut *mut TrfTensor,
) -> TrfStatus {
    if t.is_null() || out.is_null() {
        set_error("null argument".into());
        return TrfStatus::NullArgument;
    }
    run(|| {
        let cfg = SimulationConfig {
            snr_db,
            seed,
            scale_max: 255.0,
        };
        let noisy = add_noise(unsafe { &(*t).0 }, &cfg);
        unsafe { *out = Box::into_raw(Box::new(TrfTensor(noisy))) };
        Ok(TrfStatus::Ok)
    })
}

/// Affinely rescales to `[0, max_value]`.
///
/// # Safety
/// `t` must be live; `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn trf_rescale(
    t: *const TrfTensor,
    max_value: f64,
    out: *mut *mut TrfTensor,
) -> TrfStatus {
    if t.is_null() || out.is_null() {
        set_error("null argument".into());
        return TrfStatus::NullArgument;
    }
    run(|| {
        let scaled = rescale_to(unsafe { &(*t).0 }, max_value)?;
        unsafe { *out = Box::into_raw(Box::new(TrfTensor(scaled))) };
        Ok(TrfStatus::Ok)
    })
}

/// Fuses an (HSI, MSI) pair. `mode` is 0 for the plain coupled model, 1 for
/// the nuclear-norm regularized one. Passing 0 for `lambda`, `rho`, `mu0`,
/// `mu_max`, `cg_tol` or `cg_iters` selects the documented defaults.
///
/// # Safety
/// All handles must be live; `out_x_hat` must be a valid destination.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn trf_fuse(
    y: *const TrfTensor,
    z: *const TrfTensor,
    model: *const TrfModel,
    mode: c_int,
    rank1: usize,
    rank2: usize,
    rank3: usize,
    iters: usize,
    seed: u64,
    lambda: f64,
    rho: f64,
    mu0: f64,
    mu_max: f64,
    cg_tol: f64,
    cg_iters: usize,
    out_x_hat: *mut *mut TrfTensor,
) -> TrfStatus {
    if y.is_null() || z.is_null() || model.is_null() || out_x_hat.is_null() {
        set_error("null argument".into());
        return TrfStatus::NullArgument;
    }
    run(|| {
        let mode = match mode {
            0 => FusionMode::Ctrf,
            1 => FusionMode::Nctrf,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "mode {other} is not 0 (ctrf) or 1 (nctrf)"
                )))
            }
        };
        let defaults = SolverConfig::default();
        let cfg = SolverConfig {
            mode,
            lambda: if lambda > 0.0 { lambda } else { defaults.lambda },
            rho: if rho > 0.0 { rho } else { defaults.rho },
            mu0: if mu0 > 0.0 { mu0 } else { defaults.mu0 },
            mu_max: if mu_max > 0.0 { mu_max } else { defaults.mu_max },
            outer_iters: iters,
            cg: CGConfig {
                tol: if cg_tol > 0.0 { cg_tol } else { defaults.cg.tol },
                max_iter: if cg_iters > 0 {
                    cg_iters
                } else {
                    defaults.cg.max_iter
                },
            },
            seed,
        };
        let problem = FusionProblem::new(
            unsafe { (*y).0.clone() },
            unsafe { (*z).0.clone() },
            unsafe { (*model).0.clone() },
            (rank1, rank2, rank3),
        )?;
        let result = solve(&problem, &cfg)?;
        unsafe { *out_x_hat = Box::into_raw(Box::new(TrfTensor(result.x_hat))) };
        Ok(TrfStatus::Ok)
    })
}

/// Scores a reconstruction against a reference.
///
/// # Safety
/// Both handles must be live; `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn trf_evaluate(
    x_hat: *const TrfTensor,
    x_ref: *const TrfTensor,
    ratio: f64,
    peak: f64,
    out: *mut TrfQuality,
) -> TrfStatus {
    if x_hat.is_null() || x_ref.is_null() || out.is_null() {
        set_error("null argument".into());
        return TrfStatus::NullArgument;
    }
    run(|| {
        let q = evaluate(unsafe { &(*x_hat).0 }, unsafe { &(*x_ref).0 }, ratio, peak)?;
        unsafe {
            *out = TrfQuality {
                psnr: q.psnr,
                rmse: q.rmse,
                ergas: q.ergas,
                sam: q.sam,
                ssim: q.ssim,
            };
        }
        Ok(TrfStatus::Ok)
    })
}

/// Runs the library's fast invariant self-test.
#[no_mangle]
pub extern "C" fn trf_check() -> TrfStatus {
    run(|| {
        let report = trfuse::check::run_self_checks(false)?;
        if report.all_passed() {
            Ok(TrfStatus::Ok)
        } else {
            Err(Error::Numerical(format!(
                "self-test failures: {}",
                report.failed.join(", ")
            )))
        }
    })
}
