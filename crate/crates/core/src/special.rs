//! The universal function `f(t) = sqrt(1 - t^2 csch^2 t)` and the constants built from it.
//!
//! `f` governs the rescaled real-zero density next to `x = 1`. Its two awkward regimes are
//! handled separately: near `t = 0` the difference `1 - t^2 csch^2 t` cancels completely, and for
//! large `t` the hyperbolic sine overflows long before the product underflows.

use std::f64::consts::{FRAC_1_PI, LN_2};

use crate::error::{Error, Result};
use crate::quadrature::Adaptive;

/// Below this `t` the small-argument series is used for `1 - t^2 csch^2 t`.
pub const T_SWITCH: f64 = 1e-2;

/// Largest `p` accepted by [`h_constant`] by default.
pub const P_MAX: usize = 8;

/// A quadrature value together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

fn check_t(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!(
            "f(t) needs a finite t >= 0, got {t}"
        )));
    }
    Ok(())
}

/// `t^2 csch^2 t` for `t >= 0`, with the removable singularity at 0 filled in.
pub fn t2_csch2(t: f64) -> f64 {
    if t < T_SWITCH {
        1.0 - one_minus_t2_csch2(t)
    } else {
        // 2t e^{-t} / (1 - e^{-2t}) == t / sinh t, without overflow.
        let r = 2.0 * t * (-t).exp() / -(-2.0 * t).exp_m1();
        r * r
    }
}

/// `1 - t^2 csch^2 t`, accurate to full relative precision for all `t >= 0`.
pub fn one_minus_t2_csch2(t: f64) -> f64 {
    if t < T_SWITCH {
        let t2 = t * t;
        t2 * (1.0 / 3.0 + t2 * (-1.0 / 15.0 + t2 * (2.0 / 189.0 + t2 * (-1.0 / 675.0))))
    } else if t < 1.0 {
        // (sinh t - t)(sinh t + t) / sinh^2 t with sinh t - t summed as a series.
        let t2 = t * t;
        let mut term = t * t2 / 6.0;
        let mut excess = term;
        let mut k = 2.0;
        while term > 1e-18 * excess {
            term *= t2 / ((2.0 * k) * (2.0 * k + 1.0));
            excess += term;
            k += 1.0;
        }
        let sinh = t + excess;
        excess * (sinh + t) / (sinh * sinh)
    } else {
        1.0 - t2_csch2(t)
    }
}

/// `f(t) = sqrt(1 - t^2 csch^2 t)`.
pub fn f_of_t(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(one_minus_t2_csch2(t).sqrt())
}

/// `1 - f(t)`, computed as `t^2 csch^2 t / (1 + f)` so the tail keeps relative accuracy.
pub fn one_minus_f(t: f64) -> Result<f64> {
    check_t(t)?;
    let g = t2_csch2(t);
    Ok(g / (1.0 + (1.0 - g).max(0.0).sqrt()))
}

/// `f(t)/t`, continuous at 0 with limit `1/sqrt(3)`.
pub fn f_over_t(t: f64) -> Result<f64> {
    check_t(t)?;
    if t < T_SWITCH {
        let t2 = t * t;
        let q = 1.0 / 3.0 + t2 * (-1.0 / 15.0 + t2 * (2.0 / 189.0 + t2 * (-1.0 / 675.0)));
        Ok(q.sqrt())
    } else {
        Ok(one_minus_t2_csch2(t).sqrt() / t)
    }
}

/// Smallest integer `t >= 1` past which `1 - f(t) < threshold`.
pub fn tail_cutoff(threshold: f64) -> f64 {
    let mut t = 1.0;
    while one_minus_f(t).unwrap_or(0.0) >= threshold && t < 800.0 {
        t += 1.0;
    }
    t
}

/// Knobs for [`a0_constant_with`].
#[derive(Debug, Clone, Copy)]
pub struct A0Options {
    /// Point separating the `f/t` and `(f-1)/t` integrals (1 in the textbook form).
    pub split: f64,
    /// Upper limit of the tail integral; `None` picks where `1 - f < 1e-16`.
    pub tail_cutoff: Option<f64>,
    pub tol: f64,
}

impl Default for A0Options {
    fn default() -> Self {
        A0Options {
            split: 1.0,
            tail_cutoff: None,
            tol: 1e-12,
        }
    }
}

/// The measure-independent constant term of the expansion of `E_n`.
pub fn a0_constant() -> Result<Estimate> {
    a0_constant_with(A0Options::default())
}

pub fn a0_constant_with(opts: A0Options) -> Result<Estimate> {
    let split = opts.split;
    if !(split > 0.0 && split.is_finite()) {
        return Err(Error::Domain(format!(
            "split point must be positive, got {split}"
        )));
    }
    let cutoff = opts
        .tail_cutoff
        .unwrap_or_else(|| tail_cutoff(1e-16))
        .max(split + 1.0);
    let quad = Adaptive::with_tol(0.5 * opts.tol);

    let inner = quad.integrate(|t| f_over_t(t).unwrap_or(f64::NAN), 0.0, split)?;

    let mut breaks = vec![split];
    let mut b = split.max(1.0) * 2.0;
    while b < cutoff {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(cutoff);
    let outer = quad.integrate_with_breaks(|t| -one_minus_f(t).unwrap_or(f64::NAN) / t, &breaks)?;

    let sum = LN_2 - split.ln() + inner.value + outer.value;
    Ok(Estimate {
        value: 2.0 * FRAC_1_PI * sum,
        err: 2.0 * FRAC_1_PI * (inner.err + outer.err),
    })
}

/// `H_p = (1 / (2^{p-1} pi)) * int_0^inf (1 - f(t)) t^{p-1} dt`.
pub fn h_constant(p: usize) -> Result<Estimate> {
    h_constant_with(p, P_MAX, 1e-12)
}

pub fn h_constant_with(p: usize, p_max: usize, tol: f64) -> Result<Estimate> {
    if p == 0 || p > p_max {
        return Err(Error::Domain(format!(
            "H_p needs 1 <= p <= {p_max}, got {p}"
        )));
    }
    let pw = (p - 1) as i32;
    let integrand = |t: f64| one_minus_f(t).unwrap_or(f64::NAN) * t.powi(pw);
    // Cut where the integrand (~ 4 t^{p+1} e^{-2t}) is below 1e-18.
    let mut cutoff: f64 = 20.0;
    while 4.0 * cutoff.powi(pw + 2) * (-2.0 * cutoff).exp() > 1e-18 {
        cutoff += 1.0;
    }
    let mut breaks = vec![0.0, 0.5, 1.0];
    let mut b = 2.0;
    while b < cutoff {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(cutoff);
    let scale = FRAC_1_PI / 2f64.powi(pw);
    let quad = Adaptive {
        abs_tol: tol,
        rel_tol: 1e-14,
        ..Default::default()
    };
    let q = quad.integrate_with_breaks(|t| scale * integrand(t), &breaks)?;
    Ok(Estimate {
        value: q.value,
        err: q.err,
    })
}

/// `A_0` and `H_1..H_{p_max}` in one bundle.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UniversalConstants {
    pub a0: f64,
    pub a0_err: f64,
    /// `h[p - 1]` holds `H_p`.
    pub h: Vec<f64>,
    pub p_max: usize,
}

impl UniversalConstants {
    pub fn compute(p_max: usize) -> Result<Self> {
        let a0 = a0_constant()?;
        let h = (1..=p_max)
            .map(|p| h_constant_with(p, p_max, 1e-12).map(|e| e.value))
            .collect::<Result<Vec<_>>>()?;
        Ok(UniversalConstants {
            a0: a0.value,
            a0_err: a0.err,
            h,
            p_max,
        })
    }

    pub fn h(&self, p: usize) -> Option<f64> {
        p.checked_sub(1).and_then(|i| self.h.get(i).copied())
    }
}
