//! Frame bounds and jitter-stability certificates for Gabor systems
//! {e^{2 pi i b n x} h(x - a k)} on lattices a Z x b Z.
//!
//! The library is organized bottom-up:
//!
//! * [`grid`]: uniform sampling grids and sampled functions.
//! * [`windows`]: window functions (box, iterated-convolution splines, sinc,
//!   tabulated) and their scalar functionals.
//! * [`gabor`]: lattices, jitter patterns delta_{n,k} and their marginals,
//!   deterministic jitter generators.
//! * [`bounds`]: closed-form and scan-based frame bounds A, B.
//! * [`stability`]: certificates that a jittered system stays a frame, with
//!   explicit perturbed bounds.
//! * [`numerics`]: discretized systems, empirical frame bounds by power
//!   iteration, short-time Fourier transform checks, Poisson-sum checks.

pub mod bounds;
pub mod error;
pub mod gabor;
pub mod grid;
pub mod numerics;
pub mod stability;
pub mod windows;

pub(crate) mod util;

pub use error::{Error, Result};
