//! Numerical core for the renormalized stochastic complex Ginzburg-Landau
//! equation on the torus `T^2 = [0,1)^2`:
//!
//! ```text
//! du = ((i + mu) Lap u - nu |u|^{2m} u + tau u) dt + dW
//! ```
//!
//! Fields are represented by their Fourier coefficients on the square cutoff
//! `|k|_inf <= N`, nonlinearities are evaluated on a zero-padded physical grid,
//! and the solution is split as `u = v + Z` with `Z` the Ornstein-Uhlenbeck
//! process of `A = (i + mu) Lap - 1`.

pub mod besov;
pub mod error;
pub mod noise;
pub mod params;
pub mod solver;
pub mod spectral;
pub mod wick;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
