//! Recovery of 1-D signals and 2-D images from undersampled Fourier-domain
//! measurements by generalized structured low-rank matrix completion.
//!
//! The image is modeled as a sum of a piecewise-constant and a piecewise-
//! linear component. The derivative-weighted Fourier coefficients of each
//! component satisfy a convolutional annihilation relation, so their
//! Toeplitz liftings are low-rank. Both components are recovered jointly by
//! an iteratively reweighted least-squares scheme whose inner weighted
//! least-squares problem is solved by ADMM with FFT-diagonal closed-form
//! updates.

pub mod error;
mod fft;
pub mod grid;
pub mod lifting;
pub mod pipeline;
pub mod sampling;
pub mod solver;
mod util;

pub use error::{GslrError, Result};
