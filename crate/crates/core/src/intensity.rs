//! Real-zero intensity `rho_n(x)` of `P_n = sum eta_i phi_i`.
//!
//! Two formulas are available. The kernel form
//! `rho_n = sqrt(K K11 - K10^2) / (pi K)` uses Christoffel-Darboux sums and is limited to
//! moderate degrees. The Blaschke form `rho_n = sqrt(1 - h_{n+1}^2) / (pi |1 - x^2|)` is
//! evaluated through [`OpucBasis::cayley`], using `h(x) = h(1/x)` to fold `|x| > 1` onto the unit
//! interval and the reflected measure to fold `x < 0` onto `x > 0`.

use std::f64::consts::FRAC_1_PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opuc::{CayleyState, OpucBasis};

/// Degree cap for the kernel formula.
pub const KERNEL_N_MAX: usize = 256;

/// Tolerance on `|h| - 1` before a value is treated as a defect rather than rounding.
pub const CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kernel,
    Blaschke,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Kernel => "kernel",
            Method::Blaschke => "blaschke",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(Method::Kernel),
            "blaschke" => Ok(Method::Blaschke),
            other => Err(Error::Domain(format!("unknown density method {other:?}"))),
        }
    }
}

/// Intensity samples on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub rho: Vec<f64>,
    pub n: usize,
    pub spec_id: String,
    pub method: Method,
    /// Points where the direct `h` recursion drifted past `|h| = 1` and was clamped.
    pub clamped: usize,
}

/// Where on `[0, 1]` a real point lands after folding.
#[derive(Debug, Clone, Copy)]
struct Folded {
    /// `ln(1 - y)` for the folded point `y in [0, 1)`.
    ln_delta: f64,
    /// Use the reflected coefficients.
    reflected: bool,
    /// `h(x) = sign * h(y)`.
    sign: f64,
    /// `dy/dx` in absolute value: `y^2` when `|x| > 1`.
    jacobian: f64,
}

fn fold(n: usize, x: f64) -> Result<Folded> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("x must be finite, got {x}")));
    }
    let ax = x.abs();
    let (ln_delta, jacobian) = if ax > 1.0 {
        // 1 - 1/|x| = (|x| - 1)/|x|, formed without cancellation.
        ((ax - 1.0).ln() - ax.ln(), 1.0 / (ax * ax))
    } else {
        ((-ax).ln_1p(), 1.0)
    };
    let reflected = x < 0.0;
    // h_{n+1}(x; mu) = (-1)^n h_{n+1}(-x; sigma)
    let sign = if reflected && n % 2 == 1 { -1.0 } else { 1.0 };
    Ok(Folded {
        ln_delta,
        reflected,
        sign,
        jacobian,
    })
}

fn state(basis: &OpucBasis, n: usize, f: &Folded) -> Result<CayleyState> {
    basis.cayley(n, f.ln_delta, f.reflected)
}

/// `h_{n+1}(x) = (1 - x^2) b'_{n+1}(x) / (1 - b_{n+1}(x)^2)`, with `|h| <= 1`.
pub fn h_fun(basis: &OpucBasis, n: usize, x: f64) -> Result<f64> {
    let f = fold(n, x)?;
    if f.ln_delta == f64::NEG_INFINITY {
        return Ok(f.sign);
    }
    let st = state(basis, n, &f)?;
    let h = st.h();
    if h.abs() > 1.0 + CLAMP_TOL {
        return Err(Error::IllConditioned(format!(
            "|h| = {} at x = {x}",
            h.abs()
        )));
    }
    Ok(f.sign * h.clamp(-1.0, 1.0))
}

fn rho_from_state(st: &CayleyState, ln_delta: f64) -> f64 {
    // 1 - y^2 = delta (2 - delta)
    let delta = ln_delta.exp();
    FRAC_1_PI * (0.5 * st.ln_one_minus_h2() - ln_delta - (2.0 - delta).ln()).exp()
}

/// `rho_n(x)` from the Blaschke-quotient formula. At `x = +-1` the removable singularity is
/// filled in with the limit, evaluated at a distance from `+-1` below every transition scale
/// of the recursion.
pub fn rho_blaschke(basis: &OpucBasis, n: usize, x: f64) -> Result<f64> {
    rho_blaschke_counted(basis, n, x).map(|(r, _)| r)
}

fn rho_blaschke_counted(basis: &OpucBasis, n: usize, x: f64) -> Result<(f64, bool)> {
    let mut f = fold(n, x)?;
    if f.ln_delta == f64::NEG_INFINITY {
        f.ln_delta = basis.settled_ln_delta(n);
    }
    let st = state(basis, n, &f)?;
    let clamped = st.h_direct.abs() > 1.0;
    if st.h_direct.abs() > 1.0 + CLAMP_TOL {
        log::warn!(
            "direct h recursion reached |h| = {} at x = {x}, n = {n}; using the log-domain value",
            st.h_direct.abs()
        );
    }
    Ok((f.jacobian * rho_from_state(&st, f.ln_delta), clamped))
}

/// `rho_n(x)` from the Christoffel-Darboux kernels.
pub fn rho_kernel(basis: &OpucBasis, n: usize, x: f64) -> Result<f64> {
    if n > KERNEL_N_MAX {
        return Err(Error::Domain(format!(
            "kernel formula is limited to n <= {KERNEL_N_MAX}"
        )));
    }
    let k = basis.cd_kernels(n, x)?;
    let disc = (k.k * k.k11 - k.k10 * k.k10).max(0.0);
    Ok(FRAC_1_PI * disc.sqrt() / k.k)
}

/// Evaluates `rho_n` on a sorted grid.
pub fn density_grid(
    basis: &OpucBasis,
    n: usize,
    xs: &[f64],
    method: Method,
) -> Result<DensityGrid> {
    if xs.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Domain("grid points must be sorted".into()));
    }
    let clamped = AtomicUsize::new(0);
    let rho = xs
        .par_iter()
        .map(|&x| match method {
            Method::Kernel => rho_kernel(basis, n, x),
            Method::Blaschke => rho_blaschke_counted(basis, n, x).map(|(r, c)| {
                if c {
                    clamped.fetch_add(1, Ordering::Relaxed);
                }
                r
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityGrid {
        xs: xs.to_vec(),
        rho,
        n,
        spec_id: basis.spec_id.clone(),
        method,
        clamped: clamped.into_inner(),
    })
}
