//! Simulation toolkit for accelerated MRI acquisition studies.
//!
//! Generates k-space undersampling masks (fastMRI-style cartesian, radial,
//! spiral), degrades slices along the undersample / low-resolution /
//! combined acquisition paths, normalizes intensities, and scores results
//! with MSE, PSNR and SSIM. The [`bench`] module sweeps all of it over a
//! corpus and writes deterministic CSV.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fourier;
pub mod imgio;
pub mod masks;
pub mod metrics;
pub mod normalize;
pub mod phantom;
pub mod pipeline;
pub mod slice;

pub use error::{Error, Result};
pub use slice::Slice;
