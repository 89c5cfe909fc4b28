//! Szegő recursion for real Verblunsky coefficients.
//!
//! Two evaluation paths are provided. The direct path iterates the monic pair
//! `Phi_{m+1} = x Phi_m - alpha_m Phi_m^*`, `Phi^*_{m+1} = Phi^*_m - alpha_m x Phi_m` together with
//! their derivatives; it is simple and serves as a reference, but the individual polynomials
//! grow exponentially near `|x| = 1`. The ratio path follows `b = Phi/Phi^*` instead, which stays
//! in `[-1, 1]` on the real interval.
//!
//! For the real-zero density the quantity that matters is `1 - h^2` with
//! `h = (1 - x^2) b' / (1 - b^2)`, and near `x = 1` both `1 - b^2` and `1 - h^2` are tiny
//! differences. [`OpucBasis::cayley`] carries `theta = atanh b` and the logarithms of
//! `1 - h` and `1 + h` through a rearranged recursion whose terms are all nonnegative, so no
//! cancellation occurs anywhere, even when `1 - x` is far below machine epsilon and is only
//! known through its logarithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{MeasureSpec, VerblunskySeq};

/// Largest degree for which monomial coefficients are produced.
pub const N_COEFF_MAX: usize = 256;

/// Orthonormal polynomials generated by a real Verblunsky sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct OpucBasis {
    pub alphas: Vec<f64>,
    /// `kappa[m]`, leading coefficient of `phi_m`; `kappa[0] = 1`.
    pub kappa: Vec<f64>,
    pub log_kappa: Vec<f64>,
    pub spec_id: String,
    atanh_alpha: Vec<f64>,
}

/// `(Phi_m, Phi_m^*, Phi_m', Phi_m^*')` at a real point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairValues {
    pub phi: f64,
    pub phi_star: f64,
    pub dphi: f64,
    pub dphi_star: f64,
}

/// `b_{n+1}(x)` and its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeState {
    pub b: f64,
    pub db: f64,
    pub x: f64,
    pub n: usize,
}

/// Christoffel-Darboux sums `K = sum phi_i^2`, `K10 = sum phi_i' phi_i`, `K11 = sum phi_i'^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdKernels {
    pub k: f64,
    pub k10: f64,
    pub k11: f64,
}

/// State of the log-domain recursion at `x = 1 - delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CayleyState {
    /// `atanh b_{n+1}(x)`.
    pub theta: f64,
    /// `ln(1 - h)`.
    pub ln_a: f64,
    /// `ln(1 + h)`.
    pub ln_b: f64,
    /// `h` from its own recursion; relatively accurate when `|h|` is small.
    pub h_direct: f64,
}

impl CayleyState {
    /// `ln(1 - h^2)`.
    pub fn ln_one_minus_h2(&self) -> f64 {
        self.ln_a + self.ln_b
    }

    /// The best available value of `h`.
    pub fn h(&self) -> f64 {
        if self.h_direct.abs() <= 0.5 {
            self.h_direct
        } else if self.h_direct > 0.0 {
            -self.ln_a.exp_m1()
        } else {
            self.ln_b.exp_m1()
        }
    }
}

#[inline]
fn logaddexp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (-(a - b).abs()).exp().ln_1p()
}

impl OpucBasis {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        let spec_id = MeasureSpec::ExplicitVerblunsky(alphas.clone()).id();
        Self::with_id(alphas, spec_id)
    }

    pub fn with_id(alphas: Vec<f64>, spec_id: String) -> Result<Self> {
        let mut log_kappa = Vec::with_capacity(alphas.len() + 1);
        log_kappa.push(0.0);
        let mut acc = 0.0;
        for (i, &a) in alphas.iter().enumerate() {
            if !(a.is_finite() && a.abs() < 1.0) {
                return Err(Error::VerblunskyOutOfRange { index: i, value: a });
            }
            // kappa_{m+1} = kappa_m / sqrt(1 - alpha_m^2), accumulated in logs.
            acc -= 0.5 * (-a * a).ln_1p();
            log_kappa.push(acc);
        }
        let kappa = log_kappa.iter().map(|l| l.exp()).collect();
        let atanh_alpha = alphas.iter().map(|a| a.atanh()).collect();
        Ok(OpucBasis {
            alphas,
            kappa,
            log_kappa,
            spec_id,
            atanh_alpha,
        })
    }

    /// Basis for `spec` with `m` Verblunsky coefficients, enough for degrees up to `m`.
    pub fn from_spec(spec: &MeasureSpec, m: usize) -> Result<Self> {
        let VerblunskySeq { alphas, .. } = spec.verblunsky(m)?;
        Self::with_id(alphas, spec.id())
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    fn need(&self, m: usize, what: &str) -> Result<()> {
        if m > self.alphas.len() {
            return Err(Error::Domain(format!(
                "{what} needs {m} Verblunsky coefficients, basis has {}",
                self.alphas.len()
            )));
        }
        Ok(())
    }

    /// Monic values and derivatives at `x` by the paired recurrence.
    pub fn eval_pair(&self, m: usize, x: f64) -> Result<PairValues> {
        self.need(m, "eval_pair")?;
        if !x.is_finite() {
            return Err(Error::Domain(format!("x must be finite, got {x}")));
        }
        let (mut p, mut ps, mut dp, mut dps) = (1.0, 1.0, 0.0, 0.0);
        for &a in &self.alphas[..m] {
            let xp = x * p;
            let dxp = p + x * dp;
            (p, ps, dp, dps) = (xp - a * ps, ps - a * xp, dxp - a * dps, dps - a * dxp);
        }
        let out = PairValues {
            phi: p,
            phi_star: ps,
            dphi: dp,
            dphi_star: dps,
        };
        if ![p, ps, dp, dps].iter().all(|v| v.is_finite()) {
            return Err(Error::Overflow(format!("Phi_{m} at x = {x}")));
        }
        Ok(out)
    }

    /// `b_m = Phi_m / Phi_m^*` and its derivative by direct division; valid for any real `x`
    /// where `Phi_m^*` does not vanish.
    pub fn ratio_direct(&self, m: usize, x: f64) -> Result<(f64, f64)> {
        let v = self.eval_pair(m, x)?;
        if v.phi_star == 0.0 {
            return Err(Error::Domain(format!("Phi*_{m} vanishes at x = {x}")));
        }
        let b = v.phi / v.phi_star;
        let db = (v.dphi * v.phi_star - v.phi * v.dphi_star) / (v.phi_star * v.phi_star);
        Ok((b, db))
    }

    /// `b_{n+1}(x)` and `b'_{n+1}(x)` by the ratio recursion, for `|x| <= 1`.
    pub fn blaschke(&self, n: usize, x: f64) -> Result<BlaschkeState> {
        self.need(n + 1, "blaschke")?;
        if !(x.abs() <= 1.0) {
            return Err(Error::Domain(format!("blaschke needs |x| <= 1, got {x}")));
        }
        let (mut r, mut dr) = (1.0, 0.0);
        for (m, &a) in self.alphas[..=n].iter().enumerate() {
            let u = x * r;
            let du = r + x * dr;
            let den = 1.0 - a * u;
            if den.abs() < f64::EPSILON {
                return Err(Error::IllConditioned(format!(
                    "ratio recursion denominator {den:e} at step {m}, x = {x}"
                )));
            }
            r = (u - a) / den;
            dr = du * (1.0 - a * a) / (den * den);
        }
        Ok(BlaschkeState { b: r, db: dr, x, n })
    }

    /// Christoffel-Darboux kernel sums over `phi_0 .. phi_n` at `x`.
    pub fn cd_kernels(&self, n: usize, x: f64) -> Result<CdKernels> {
        self.need(n, "cd_kernels")?;
        let (mut p, mut ps, mut dp, mut dps) = (1.0, 1.0, 0.0, 0.0);
        let mut out = CdKernels {
            k: 1.0,
            k10: 0.0,
            k11: 0.0,
        };
        for (m, &a) in self.alphas[..n].iter().enumerate() {
            let xp = x * p;
            let dxp = p + x * dp;
            (p, ps, dp, dps) = (xp - a * ps, ps - a * xp, dxp - a * dps, dps - a * dxp);
            let kap = self.kappa[m + 1];
            let (f, df) = (kap * p, kap * dp);
            out.k += f * f;
            out.k10 += df * f;
            out.k11 += df * df;
        }
        if ![out.k, out.k10, out.k11].iter().all(|v| v.is_finite()) {
            return Err(Error::Overflow(format!(
                "Christoffel-Darboux sums, n = {n}, x = {x}"
            )));
        }
        Ok(out)
    }

    /// Matrix of multiplication by `z` modulo `p = sum_{j<=d} eta[j] phi_j`, in the basis
    /// `phi_0 .. phi_{d-1}`; its eigenvalues are the roots of `p`.
    ///
    /// Column `k` holds the expansion `z phi_k = rho_k phi_{k+1} + alpha_k phi_k^*` with
    /// `phi_k^* = sum_{j<=k} (-alpha_{j-1}) rho_j ... rho_{k-1} phi_j` and `alpha_{-1} = -1`.
    /// Apart from the last column every entry is bounded by one, so the eigenvalues are far
    /// better conditioned than those of the monomial companion matrix when the monomial
    /// coefficients of `phi_n` are large. Returns the row-major upper Hessenberg matrix and
    /// `d`; `d` is `eta.len() - 1` unless trailing weights are exactly zero.
    pub fn confederate(&self, eta: &[f64]) -> Result<(Vec<f64>, usize)> {
        let d = match eta.iter().rposition(|&e| e != 0.0) {
            Some(d) => d,
            None => return Err(Error::Domain("all weights are zero".into())),
        };
        self.need(d, "confederate")?;
        let mut a = vec![0.0; d * d];
        for k in 0..d {
            let ak = self.alphas[k];
            // walk j downwards, accumulating rho_j ... rho_{k-1}
            let mut prod = 1.0;
            for j in (0..=k).rev() {
                let prev = if j == 0 { -1.0 } else { self.alphas[j - 1] };
                a[j * d + k] = -ak * prev * prod;
                if j > 0 {
                    prod *= (1.0 - prev * prev).sqrt();
                }
            }
            let rho_k = (1.0 - ak * ak).sqrt();
            if k + 1 < d {
                a[(k + 1) * d + k] = rho_k;
            } else {
                for (j, &e) in eta[..d].iter().enumerate() {
                    a[j * d + k] -= rho_k * e / eta[d];
                }
            }
        }
        Ok((a, d))
    }

    /// Monomial coefficients of `phi_0 .. phi_n`, row `m` lowest degree first.
    pub fn monomial_coeffs(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        if n > N_COEFF_MAX {
            return Err(Error::Domain(format!(
                "monomial coefficients are limited to degree {N_COEFF_MAX}, asked for {n}"
            )));
        }
        self.need(n, "monomial_coeffs")?;
        let mut rows = Vec::with_capacity(n + 1);
        let mut p = vec![1.0];
        rows.push(p.clone());
        for m in 0..n {
            let a = self.alphas[m];
            let mut next = vec![0.0; m + 2];
            for j in 0..=m {
                next[j + 1] += p[j];
                next[j] -= a * p[m - j];
            }
            p = next;
            rows.push(p.iter().map(|c| c * self.kappa[m + 1]).collect());
        }
        Ok(rows)
    }

    /// Runs the log-domain recursion for `b_{n+1}` at `x = 1 - delta`, `0 < delta <= 1`,
    /// given `ln delta`. With `reflected` the coefficients `(-1)^{m+1} alpha_m` are used,
    /// i.e. the basis of the reflected measure.
    ///
    /// In terms of `T = tanh theta_m` and `Den = (1 - xT)(1 + xT)` the updates are
    ///
    /// ```text
    /// theta' = atanh(x T) - atanh(alpha)
    /// A'     = (1 - T) [delta (1 - xT) + x (1 + T) A] / Den,   A = 1 - h
    /// B'     = (1 + T) [delta (1 + xT) + x (1 - T) B] / Den,   B = 1 + h
    /// h'     = [delta (1 + x) T + x (1 - T^2) h] / Den
    /// ```
    ///
    /// starting from `theta = +inf`, `A = B = 1`, `h = 0`. Factors such as `1 - T` and
    /// `1 - xT` are formed from `theta` and `ln delta` directly.
    pub fn cayley(&self, n: usize, ln_delta: f64, reflected: bool) -> Result<CayleyState> {
        self.need(n + 1, "cayley")?;
        if !(ln_delta <= 0.0) {
            return Err(Error::Domain(format!(
                "need 0 < delta <= 1, got ln delta = {ln_delta}"
            )));
        }
        let delta = ln_delta.exp();
        let x = 1.0 - delta;
        let ln_x = (-delta).ln_1p();
        let ln_delta_1px = ln_delta + (1.0 - delta).ln_1p();
        let ln2 = std::f64::consts::LN_2;

        let mut theta = f64::INFINITY;
        let (mut ln_a, mut ln_b, mut h) = (0.0f64, 0.0f64, 0.0f64);
        for (m, &ath) in self.atanh_alpha[..=n].iter().enumerate() {
            let (t, l1m, l1p, lxm, lxp);
            if theta >= 0.0 {
                let e = (-2.0 * theta).exp();
                let lq = e.ln_1p();
                t = theta.tanh();
                l1m = ln2 - 2.0 * theta - lq;
                l1p = ln2 - lq;
                lxp = (x * t).ln_1p();
                lxm = if x * t < 0.5 {
                    (-x * t).ln_1p()
                } else {
                    logaddexp(ln_delta, ln_x + l1m)
                };
            } else {
                let e = (2.0 * theta).exp();
                let lq = e.ln_1p();
                t = theta.tanh();
                l1p = ln2 + 2.0 * theta - lq;
                l1m = ln2 - lq;
                lxm = (-x * t).ln_1p();
                lxp = if -x * t < 0.5 {
                    (x * t).ln_1p()
                } else {
                    logaddexp(ln_delta, ln_x + l1p)
                };
            }
            let ln_den = lxm + lxp;
            let new_ln_a = l1m + logaddexp(ln_delta + lxm, ln_x + l1p + ln_a) - ln_den;
            let new_ln_b = l1p + logaddexp(ln_delta + lxp, ln_x + l1m + ln_b) - ln_den;
            h = t * (ln_delta_1px - ln_den).exp() + x * (l1m + l1p - ln_den).exp() * h;
            ln_a = new_ln_a;
            ln_b = new_ln_b;
            let a = if reflected && m % 2 == 0 { -ath } else { ath };
            // For small |xT| the difference of logarithms would lose the relative accuracy of theta.
            let xt = x * t;
            theta = if xt.abs() < 0.5 {
                xt.atanh()
            } else {
                0.5 * (lxp - lxm)
            } - a;
            if theta.is_nan() || ln_a.is_nan() || ln_b.is_nan() || h.is_nan() {
                return Err(Error::IllConditioned(format!(
                    "log-domain recursion broke down at step {m}, ln delta = {ln_delta}"
                )));
            }
        }
        Ok(CayleyState {
            theta,
            ln_a,
            ln_b,
            h_direct: h,
        })
    }

    /// `ln delta` below which the recursion state at `1 - delta` has settled to its limit.
    ///
    /// Each step can move `theta` by at most `2 |atanh alpha_m|` relative to the pure power
    /// `x^{n+1}`, so `delta` well below `(n+1)^{-1} exp(-2 sum |atanh alpha_m|)` is past every
    /// transition.
    pub fn settled_ln_delta(&self, n: usize) -> f64 {
        let s: f64 = self.atanh_alpha[..=n.min(self.len().saturating_sub(1))]
            .iter()
            .map(|a| a.abs())
            .sum();
        -(2.0 * s + ((n + 1) as f64).ln() + 40.0)
    }
}
