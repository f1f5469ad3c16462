//! Robust sparse recovery by quadratically-constrained basis pursuit.
//!
//! The crate is organised around five pieces:
//!
//! * [`ensembles`]: seeded random sensing matrices (Gaussian, partial DFT in
//!   three sampling models, nonharmonic Fourier, Chebyshev and generic
//!   subsampled isometries), sparse signals and noise.
//! * [`solver`]: the QCBP decoder `min ‖z‖₁ s.t. ‖Az − y‖₂ ≤ η` as a
//!   primal-dual proximal splitting, plus an ADMM reference decoder for
//!   small instances.
//! * [`analysis`]: restricted isometry constants, null space constants,
//!   quotient bounds, cross coherence, distortion, the Christoffel function
//!   and the measurement-count and error-budget formulas.
//! * [`polyapprox`]: sparse Chebyshev approximation from noisy samples.
//! * [`harness`]: declarative experiment sweeps, summaries, CSV and SVG
//!   output.

// Negated comparisons are how NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod polyapprox;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex64;
