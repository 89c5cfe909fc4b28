//! Expected number of real zeros of Gaussian random polynomials built from orthonormal
//! polynomials on the unit circle.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`] evaluates the universal function `f(t)` and the constants `A_0`, `H_p`.
//! * [`measure`] describes conjugate-symmetric measures and produces Verblunsky coefficients.
//! * [`szego`] builds the Szegő and scattering functions of an analytic weight.
//! * [`opuc`] runs the Szegő recursion and the Blaschke-quotient recursion.
//! * [`intensity`] evaluates the real-zero density `rho_n`.
//! * [`expect`] integrates the density into `E_n`.
//! * [`mc`] is a Monte Carlo root-counting oracle.
//! * [`fit`] fits the large-`n` expansion to a ladder of `E_n` values.

// Negated float comparisons such as `!(x > 0.0)` are used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix and recurrence formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod expect;
pub mod fit;
pub mod intensity;
pub mod mc;
pub mod measure;
pub mod opuc;
pub mod quadrature;
pub mod roots;
pub mod special;
pub mod szego;

pub use error::{Error, Result};
