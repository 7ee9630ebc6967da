//! Coupled tensor-ring factorization for hyperspectral super-resolution.
//!
//! Fuses a low-spatial-resolution hyperspectral cube and a high-spatial-
//! resolution multispectral cube into a high-resolution hyperspectral cube
//! via shared tensor-ring cores, optionally regularized with a nuclear-norm
//! penalty on the spectral core (solved by alternating block updates, inner
//! conjugate-gradient solves, and singular value thresholding).

pub mod check;
pub mod cli;
pub mod degradation;
pub mod error;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod ring;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{DenseTensor, Matrix};
