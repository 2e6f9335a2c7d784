//! Sampling frames and interpolating Riesz sequences of reproducing kernels
//! on locally compact groups.
//!
//! The library works at desk scale: the group is replaced by a quadrature
//! window, suprema become maxima over grid nodes, and every construction is
//! accompanied by a certificate recording the window, the tolerances, and the
//! envelope that witnesses the claimed decay.
//!
//! Modules, bottom up:
//!
//! * [`group`] — concrete group arithmetic, Haar quadrature, admissible weights
//!   for the three scenario groups (line, plane, affine `ℝ⋊ℝ*`).
//! * [`envelope`] — local maximal functions, weighted amalgam norms, group
//!   convolution, synthesis bounds.
//! * [`pointset`] — sampling families: separation, density, disjoint covers,
//!   uniformity, near-uniform set construction.
//! * [`rkhs`] — reproducing kernels and the diagonal/localization/uniform
//!   continuity certificates.
//! * [`cdalgebra`] — convolution-dominated kernels and matrices, Schur and
//!   `ℓᵖ` bounds, holomorphic calculus with envelope tracking.
//! * [`frames`] — frame and Riesz constructions: almost-tight frames, dual and
//!   tight frames of molecules, canonical duals, biorthogonal systems,
//!   orthonormalization, interpolation.
//! * [`scenarios`] — the concrete kernels: Fock space on the plane, affine
//!   wavelet space, regularized bandlimited control case.
//! * [`cert`] — certificate schema, CSV and binary column serialization.
//! * [`cli`] — batch pipeline configuration and orchestration.

pub mod cdalgebra;
pub mod cert;
pub mod cli;
pub mod envelope;
pub mod error;
pub mod frames;
pub mod group;
pub mod linalg;
pub mod pointset;
pub mod rkhs;
pub mod scenarios;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
