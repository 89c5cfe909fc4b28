//! Szegő function and scattering function of an analytic weight.
//!
//! With `ell_k` the Fourier coefficients of `ln w(theta)` (real and even by conjugate
//! symmetry), the interior Szegő function is `D_int(z) = exp(ell_0/2 + sum_{k>=1} ell_k z^k)`,
//! the exterior one is `D_ext(z) = 1 / D_int(1/z)`, and the scattering function
//! `S = D_int D_ext` is `exp(sum_{k>=1} ell_k (z^k - z^{-k}))`.
//!
//! Taylor coefficients of `S` at `z = 1` are obtained by substituting `z = 1 - u` into the
//! truncated series exactly: `z^k` and `z^{-k}` expand with binomial coefficients, which gives
//! the coefficients `c_p` of `ln S`, and the exponential recurrence then gives `s_p`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{default_grid, MeasureSpec};

/// Default truncation order.
pub const DEFAULT_K: usize = 128;

/// Highest Taylor order offered by [`SzegoFunction::scattering_expansion`].
pub const P_MAX: usize = 6;

/// Coefficients below this magnitude are treated as quadrature noise and dropped.
const NOISE_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SzegoFunction {
    /// `ell[k]`, `k = 0..=K`; trailing noise is zeroed.
    pub ell: Vec<f64>,
    pub k: usize,
    /// `D_ext(infinity) = exp(-ell_0/2)`.
    pub tau: f64,
    /// Estimated decay ratio of `|ell_k|`; the series converge for `rho < |z| < 1/rho`.
    pub rho: f64,
    /// `|ell_K|` before truncation, a convergence diagnostic.
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringExpansion {
    /// `s[p - 1]` is the coefficient of `(1 - z)^p` in `S(z)`.
    pub s: Vec<f64>,
    /// `c[p - 1]` is the coefficient of `(1 - z)^p` in `ln S(z)`.
    pub c: Vec<f64>,
    /// `|sum_p s_p step^p - S(1 - step)|` including the constant term, a truncation check.
    pub residual: f64,
}

/// Builds the Szegő function of a weight family from `K` Fourier coefficients of `ln w`.
pub fn szego_from_weight(spec: &MeasureSpec, k: usize) -> Result<SzegoFunction> {
    if k == 0 {
        return Err(Error::Domain("truncation order must be positive".into()));
    }
    let weight = spec.weight()?;
    let g = default_grid(k);
    let mut buf = Vec::with_capacity(g);
    for j in 0..g {
        let th = std::f64::consts::TAU * j as f64 / g as f64;
        let w = weight.eval(th);
        if !(w > 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "weight is not positive at theta = {th}"
            )));
        }
        buf.push(Complex64::new(weight.ln_eval(th), 0.0));
    }
    FftPlanner::new().plan_fft_forward(g).process(&mut buf);
    let mut ell: Vec<f64> = buf[..=k].iter().map(|z| z.re / g as f64).collect();
    let tail = ell[k].abs();
    if tail >= 1e-15 {
        log::warn!("Szegő series for {spec} not converged at K = {k}: |ell_K| = {tail:e}");
    }
    let last = (1..=k)
        .rev()
        .find(|&j| ell[j].abs() > NOISE_FLOOR)
        .unwrap_or(0);
    for v in ell.iter_mut().skip(last + 1) {
        *v = 0.0;
    }
    let rho = decay_ratio(&ell);
    Ok(SzegoFunction {
        tau: (-0.5 * ell[0]).exp(),
        ell,
        k,
        rho,
        tail,
    })
}

/// Geometric decay ratio of the nonzero `ell_k`, from a log-linear fit; 0 for finite series
/// that stop within a handful of terms.
fn decay_ratio(ell: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ell
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, v)| v.abs() > NOISE_FLOOR)
        .map(|(k, v)| (k as f64, v.abs().ln()))
        .collect();
    if pts.len() < 8 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx).exp().min(1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl SzegoFunction {
    fn series(&self, z: Complex64) -> Complex64 {
        self.ell[1..]
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &l| (acc + l) * z)
    }

    fn check_inside(&self, z: Complex64) -> Result<()> {
        if !(z.norm() < 1.0 / self.rho.max(f64::MIN_POSITIVE)) || !z.is_finite() {
            return Err(Error::Domain(format!(
                "z = {z} lies outside the disk of convergence"
            )));
        }
        Ok(())
    }

    /// `D_int(z)` for `|z| < 1/rho`.
    pub fn d_int(&self, z: Complex64) -> Result<Complex64> {
        self.check_inside(z)?;
        Ok((0.5 * self.ell[0] + self.series(z)).exp())
    }

    /// `D_ext(z) = 1 / D_int(1/z)` for `|z| > rho`.
    pub fn d_ext(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() == 0.0 {
            return Err(Error::Domain("D_ext is not defined at 0".into()));
        }
        Ok(1.0 / self.d_int(1.0 / z)?)
    }

    /// `S(z) = D_int(z) D_ext(z)` on the annulus `rho < |z| < 1/rho`.
    pub fn scattering_at(&self, z: Complex64) -> Result<Complex64> {
        let r = z.norm();
        if !(r > self.rho && r < 1.0 / self.rho.max(f64::MIN_POSITIVE)) {
            return Err(Error::Domain(format!(
                "z = {z} lies outside the annulus {} < |z| < {}",
                self.rho,
                1.0 / self.rho
            )));
        }
        Ok((self.series(z) - self.series(1.0 / z)).exp())
    }

    /// Taylor coefficients of `S` and `ln S` in powers of `1 - z`, through order `p`.
    pub fn scattering_expansion(&self, p: usize, step: f64) -> Result<ScatteringExpansion> {
        if p == 0 || p > P_MAX {
            return Err(Error::Domain(format!(
                "expansion order must be in 1..={P_MAX} in double precision, got {p}"
            )));
        }
        if !(step > 0.0 && step <= 1e-2) {
            return Err(Error::Domain(format!(
                "step must be in (0, 1e-2], got {step}"
            )));
        }
        // c_q = sum_k ell_k [(-1)^q C(k, q) - C(k + q - 1, q)]
        let c: Vec<f64> = (1..=p)
            .map(|q| {
                let sgn = if q % 2 == 0 { 1.0 } else { -1.0 };
                self.ell
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, &l)| l * (sgn * binomial(k, q) - binomial(k + q - 1, q)))
                    .sum()
            })
            .collect();
        // exp of a power series: q s_q = sum_{j=1}^q j c_j s_{q-j}
        let mut s = vec![1.0];
        for q in 1..=p {
            let acc: f64 = (1..=q).map(|j| j as f64 * c[j - 1] * s[q - j]).sum();
            s.push(acc / q as f64);
        }
        let approx: f64 = s
            .iter()
            .enumerate()
            .map(|(q, v)| v * step.powi(q as i32))
            .sum();
        let direct = self.scattering_at(Complex64::new(1.0 - step, 0.0))?.re;
        Ok(ScatteringExpansion {
            s: s[1..].to_vec(),
            c,
            residual: (approx - direct).abs(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn lebesgue_is_trivial() {
        let sz = szego_from_weight(&MeasureSpec::Lebesgue, 16).unwrap();
        assert!((sz.ell[0] - (1.0 / TAU).ln()).abs() < 1e-14);
        assert!(sz.ell[1..].iter().all(|&v| v == 0.0));
        let d = sz.d_int(Complex64::new(0.3, 0.2)).unwrap();
        assert!((d - Complex64::new(TAU.powf(-0.5), 0.0)).norm() < 1e-14);
        for z in [Complex64::new(0.5, 0.0), Complex64::new(3.0, 1.0)] {
            assert!((sz.scattering_at(z).unwrap() - 1.0).norm() < 1e-15);
        }
        let e = sz.scattering_expansion(4, 1e-3).unwrap();
        assert!(e.s.iter().chain(&e.c).all(|&v| v == 0.0));
        assert!(szego_from_weight(&MeasureSpec::Geronimus(0.3), 16).is_err());
    }

    #[test]
    fn bernstein_szego_log_coefficients() {
        let a: f64 = 0.5;
        let sz = szego_from_weight(&MeasureSpec::BernsteinSzego(a), 64).unwrap();
        for k in 1..=40 {
            let want = a.powi(k as i32) / k as f64;
            assert!((sz.ell[k] - want).abs() < 1e-15, "k={k}");
        }
        assert!((sz.rho - 0.5).abs() < 0.05, "rho {}", sz.rho);
        let coarse = szego_from_weight(&MeasureSpec::BernsteinSzego(a), 32).unwrap();
        for k in 0..=32 {
            assert!((coarse.ell[k] - sz.ell[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_ratio_is_the_weight() {
        for spec in [
            MeasureSpec::BernsteinSzego(0.5),
            MeasureSpec::TrigPolyWeight(vec![0.2]),
            MeasureSpec::TrigPolyWeight(vec![0.4, -0.3, 0.1]),
        ] {
            let sz = szego_from_weight(&spec, DEFAULT_K).unwrap();
            let w = spec.weight().unwrap();
            for j in 0..64 {
                let th = TAU * j as f64 / 64.0;
                let xi = Complex64::from_polar(1.0, th);
                let ratio = sz.d_int(xi).unwrap() / sz.d_ext(xi).unwrap();
                assert!((ratio - w.eval(th)).norm() < 1e-10, "{spec} theta={th}");
            }
        }
    }

    #[test]
    fn scattering_values_and_symmetries() {
        let sz = szego_from_weight(&MeasureSpec::BernsteinSzego(0.5), DEFAULT_K).unwrap();
        assert!((sz.scattering_at(Complex64::new(1.0, 0.0)).unwrap() - 1.0).norm() < 1e-10);
        for j in 0..100 {
            let xi = Complex64::from_polar(1.0, 0.0628 * j as f64);
            assert!((sz.scattering_at(xi).unwrap().norm() - 1.0).abs() < 1e-10);
        }
        // Closed form for this family: S(z) = (1 - a/z) / (1 - a z).
        for &x in &[0.8, 0.9, 1.1, 1.25] {
            let z = Complex64::new(x, 0.0);
            let s = sz.scattering_at(z).unwrap();
            let inv = sz.scattering_at(1.0 / z).unwrap();
            assert!((s * inv - 1.0).norm() < 1e-9);
            let closed = (1.0 - 0.5 / x) / (1.0 - 0.5 * x);
            assert!((s.re - closed).abs() < 1e-10, "x={x}: {} vs {closed}", s.re);
        }
        let z = Complex64::new(0.7, 0.4);
        assert!((sz.d_int(z.conj()).unwrap() - sz.d_int(z).unwrap().conj()).norm() < 1e-14);
        let far = sz.d_ext(Complex64::new(1e14, 0.0)).unwrap();
        assert!((far.re - sz.tau).abs() < 1e-10 * sz.tau);
        assert!(sz.scattering_at(Complex64::new(0.2, 0.0)).is_err());
        assert!(sz.scattering_at(Complex64::new(5.0, 0.0)).is_err());
    }

    // Taylor coefficients of S at 1 by the Cauchy integral on |z - 1| = r (trapezoid rule).
    fn cauchy_coeffs(sz: &SzegoFunction, p: usize, r: f64) -> Vec<f64> {
        let m = 256;
        (1..=p)
            .map(|q| {
                let sum: Complex64 = (0..m)
                    .map(|j| {
                        let e = Complex64::from_polar(1.0, TAU * j as f64 / m as f64);
                        // expansion variable u = 1 - z = -r e
                        let z = 1.0 + r * e;
                        sz.scattering_at(z).unwrap() * (-r * e).powi(-(q as i32))
                    })
                    .sum();
                sum.re / m as f64
            })
            .collect()
    }

    #[test]
    fn lemma_identities_and_cauchy_oracle() {
        for spec in [
            MeasureSpec::BernsteinSzego(0.5),
            MeasureSpec::TrigPolyWeight(vec![0.2]),
        ] {
            let sz = szego_from_weight(&spec, DEFAULT_K).unwrap();
            let e = sz.scattering_expansion(6, 1e-3).unwrap();
            let (s1, s2) = (e.s[0], e.s[1]);
            assert!((s2 - s1 * (s1 + 1.0) / 2.0).abs() < 1e-8);
            assert!((e.c[0] - s1).abs() < 1e-8);
            assert!((e.c[1] - s1 / 2.0).abs() < 1e-8);
            assert!(e.residual < 1e-15, "{spec}: {}", e.residual);
            let oracle = cauchy_coeffs(&sz, 6, 0.3);
            for (q, (a, b)) in e.s.iter().zip(&oracle).enumerate() {
                assert!(
                    (a - b).abs() < 1e-9 * (1.0 + b.abs()),
                    "{spec} s_{}: {a} vs {b}",
                    q + 1
                );
            }
        }
        // Closed form S = (1 - a/z)/(1 - a z) gives s_1 = -2a/(1-a) for a = 0.5: -2.
        let sz = szego_from_weight(&MeasureSpec::BernsteinSzego(0.5), DEFAULT_K).unwrap();
        let e = sz.scattering_expansion(2, 1e-2).unwrap();
        assert!((e.s[0] + 2.0).abs() < 1e-12, "{}", e.s[0]);
        assert!(sz.scattering_expansion(7, 1e-3).is_err());
        assert!(sz.scattering_expansion(2, 0.5).is_err());
        let _ = PI;
    }
}
