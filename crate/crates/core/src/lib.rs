//! Linear dynamics of stacked elastic plates separated by layers of
//! potential flow in a flat channel.
//!
//! Each Fourier mode k of the plate displacements evolves under a 2n x 2n
//! generator `M(k)`. The crate builds that generator, propagates initial data,
//! classifies stability, computes pseudospectra and cross-checks the
//! assembly against an independent formulation.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod linalg;
pub mod ndim;
pub mod propagator;
pub mod pseudospectrum;
pub mod spectral;
pub mod stability;
pub mod verifier;

pub use channel::{ChannelConfig, ValidatedConfig};
pub use error::{Error, Result};
pub use num_complex::Complex64;
