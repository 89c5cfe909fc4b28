//! Polynomial roots as eigenvalues of a balanced companion matrix.
//!
//! The companion matrix is already upper Hessenberg, so after Parlett-Reinsch balancing the
//! eigenvalues come straight out of the Francis double-shift QR iteration without a reduction
//! step. A Sturm-sequence counter is provided as an independent check for low degrees.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative size below which leading coefficients are dropped.
pub const TRIM_REL: f64 = 1e-13;

/// Removes negligible leading coefficients (relative to the largest one) and returns the
/// coefficients of the effective polynomial, lowest degree first.
pub fn trim(coeffs: &[f64]) -> Result<&[f64]> {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Domain(
            "polynomial must have a nonzero finite coefficient".into(),
        ));
    }
    let mut d = coeffs.len() - 1;
    while d > 0 && coeffs[d].abs() <= TRIM_REL * max {
        d -= 1;
    }
    Ok(&coeffs[..=d])
}

/// All complex roots of the polynomial `sum coeffs[k] x^k`.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let c = trim(coeffs)?;
    let d = c.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = c[d];
    let mut a = vec![0.0; d * d];
    for k in 0..d {
        a[k] = -c[d - 1 - k] / lead;
    }
    for j in 1..d {
        a[j * d + j - 1] = 1.0;
    }
    balance(&mut a, d);
    hqr(&mut a, d)
}

/// Eigenvalues of a real upper Hessenberg matrix, given row-major, after balancing.
pub fn hessenberg_eigenvalues(mut a: Vec<f64>, n: usize) -> Result<Vec<Complex64>> {
    if a.len() != n * n {
        return Err(Error::Domain(format!(
            "expected a {n}x{n} matrix, got {} entries",
            a.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    balance(&mut a, n);
    hqr(&mut a, n)
}

/// Parlett-Reinsch balancing by powers of two, in place.
fn balance(a: &mut [f64], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut r, mut c) = (0.0, 0.0);
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i * n + j] *= g;
                    }
                    for j in 0..n {
                        a[j * n + i] *= f;
                    }
                }
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix (row-major, destroyed) by the Francis
/// double-shift QR algorithm with exceptional shifts.
fn hqr(a: &mut [f64], n: usize) -> Result<Vec<Complex64>> {
    const MAX_ITS: usize = 60;
    let idx = |i: usize, j: usize| i * n + j;
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[idx(i, j)].abs();
        }
    }
    let eps = f64::EPSILON;
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[idx(l, l - 1)].abs() <= eps * s {
                    a[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[idx(nu, nu)];
            if l == nu {
                w[nu] = Complex64::new(x + t, 0.0);
                nn -= 1;
            } else {
                let mut y = a[idx(nu - 1, nu - 1)];
                let mut ww = a[idx(nu, nu - 1)] * a[idx(nu - 1, nu)];
                if l == nu - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + ww;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        w[nu - 1] = Complex64::new(x + z, 0.0);
                        w[nu] = Complex64::new(if z != 0.0 { x - ww / z } else { x + z }, 0.0);
                    } else {
                        w[nu] = Complex64::new(x + p, -z);
                        w[nu - 1] = w[nu].conj();
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITS {
                        return Err(Error::Eigen(format!(
                            "QR iteration did not converge for n = {n}"
                        )));
                    }
                    if its % 10 == 0 && its > 0 {
                        t += x;
                        for i in 0..=nu {
                            a[idx(i, i)] -= x;
                        }
                        let s = a[idx(nu, nu - 1)].abs() + a[idx(nu - 1, nu - 2)].abs();
                        x = 0.75 * s;
                        y = x;
                        ww = -0.4375 * s * s;
                    }
                    its += 1;
                    let (mut p, mut q, mut r, mut z);
                    let mut m = nu - 2;
                    loop {
                        z = a[idx(m, m)];
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - ww) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
                        q = a[idx(m + 1, m + 1)] - z - rr - ss;
                        r = a[idx(m + 2, m + 1)];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs()
                            * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..nu - 1 {
                        a[idx(i + 2, i)] = 0.0;
                        if i != m {
                            a[idx(i + 2, i - 1)] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nu {
                        if k != m {
                            p = a[idx(k, k - 1)];
                            q = a[idx(k + 1, k - 1)];
                            r = if k + 1 != nu {
                                a[idx(k + 2, k - 1)]
                            } else {
                                0.0
                            };
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                                }
                            } else {
                                a[idx(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                let mut pp = a[idx(k, j)] + q * a[idx(k + 1, j)];
                                if k + 1 != nu {
                                    pp += r * a[idx(k + 2, j)];
                                    a[idx(k + 2, j)] -= pp * z;
                                }
                                a[idx(k + 1, j)] -= pp * y;
                                a[idx(k, j)] -= pp * x;
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for i in l..=mmin {
                                let mut pp = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                                if k + 1 != nu {
                                    pp += z * a[idx(i, k + 2)];
                                    a[idx(i, k + 2)] -= pp * r;
                                }
                                a[idx(i, k + 1)] -= pp * q;
                                a[idx(i, k)] -= pp;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 0 || l + 1 >= nn as usize {
                break;
            }
        }
    }
    if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok(w)
}

/// Number of distinct real roots in `(a, b]` by a Sturm sequence in floating point.
///
/// Only reliable for low degrees and well-separated roots; intended as a cross-check.
pub fn sturm_count(coeffs: &[f64], a: f64, b: f64) -> Result<usize> {
    let p = trim(coeffs)?.to_vec();
    if p.len() == 1 {
        return Ok(0);
    }
    let dp: Vec<f64> = p
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect();
    let mut seq = vec![p, dp];
    loop {
        let (u, v) = (&seq[seq.len() - 2], &seq[seq.len() - 1]);
        if v.len() == 1 {
            break;
        }
        let mut rem = poly_rem(u, v);
        let scale = u.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        while rem.len() > 1 && rem.last().unwrap().abs() <= 1e-10 * scale {
            rem.pop();
        }
        if rem.iter().all(|c| c.abs() <= 1e-10 * scale) {
            break;
        }
        let neg: Vec<f64> = rem.iter().map(|c| -c).collect();
        seq.push(neg);
    }
    let changes = |x: f64| {
        let signs: Vec<f64> = seq
            .iter()
            .map(|p| p.iter().rev().fold(0.0, |acc, c| acc * x + c))
            .filter(|v| *v != 0.0)
            .collect();
        signs
            .windows(2)
            .filter(|w| w[0].signum() != w[1].signum())
            .count()
    };
    Ok(changes(a).saturating_sub(changes(b)))
}

fn poly_rem(u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut r = u.to_vec();
    let dv = v.len() - 1;
    let lead = v[dv];
    while r.len() > dv && !r.is_empty() {
        let dr = r.len() - 1;
        let f = r[dr] / lead;
        for j in 0..=dv {
            r[dr - dv + j] -= f * v[j];
        }
        r.pop();
    }
    if r.is_empty() {
        r.push(0.0);
    }
    r
}
