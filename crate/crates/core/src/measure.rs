//! Conjugate-symmetric probability measures on the unit circle.
//!
//! A measure is either one of a few weight families, described by its density `w(theta)` with
//! respect to `d theta`, or it is given directly by real Verblunsky coefficients. Moments of the
//! weight families are computed with the periodic trapezoid rule (via FFT) and turned into
//! Verblunsky coefficients by a Levinson recursion on the monic polynomials.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A conjugate-symmetric probability measure on the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeasureSpec {
    /// Normalized arclength, `w = 1/(2 pi)`.
    Lebesgue,
    /// Constant Verblunsky coefficients `alpha_m = a`.
    Geronimus(f64),
    /// `w(theta) = (1 - a^2) / (2 pi |1 - a e^{i theta}|^2)`, whose only nonzero Verblunsky
    /// coefficient is `alpha_0 = a`.
    BernsteinSzego(f64),
    /// `w(theta)` proportional to `exp(sum_k coeffs[k-1] cos(k theta))`, `k = 1, 2, ...`.
    TrigPolyWeight(Vec<f64>),
    /// A finite Verblunsky sequence, extended by zeros.
    ExplicitVerblunsky(Vec<f64>),
    /// The image of the inner measure under `xi -> -xi`.
    Reflected(Box<MeasureSpec>),
}

/// Trigonometric moments `c[k] = int xi^{-k} d mu(xi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeq {
    pub c: Vec<f64>,
    pub grid_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerblunskySource {
    Explicit,
    Levinson,
}

/// Real Verblunsky coefficients `alpha_0 .. alpha_{M-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerblunskySeq {
    pub alphas: Vec<f64>,
    pub source: VerblunskySource,
}

impl VerblunskySeq {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Least-squares slope of `ln |alpha_m|` against `m`, over entries above `floor`.
    ///
    /// Returns `None` when fewer than three coefficients clear the floor.
    pub fn decay_slope(&self, floor: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .alphas
            .iter()
            .enumerate()
            .filter(|(_, a)| a.abs() > floor)
            .map(|(m, a)| (m as f64, a.abs().ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

fn check_alpha(index: usize, value: f64) -> Result<()> {
    if value.is_finite() && value.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::VerblunskyOutOfRange { index, value })
    }
}

/// `(-1)^{m+1} alpha_m`, the Verblunsky coefficients of the reflected measure.
pub fn reflect_alphas(alphas: &[f64]) -> Vec<f64> {
    alphas
        .iter()
        .enumerate()
        .map(|(m, &a)| if m % 2 == 0 { -a } else { a })
        .collect()
}

/// Default moment grid: `max(1024, 8K)` rounded up to a power of two.
pub fn default_grid(k: usize) -> usize {
    (8 * k).max(1024).next_power_of_two()
}

impl MeasureSpec {
    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::Lebesgue => Ok(()),
            MeasureSpec::Geronimus(a) | MeasureSpec::BernsteinSzego(a) => {
                if a.is_finite() && a.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidMeasure(format!(
                        "parameter must satisfy |a| < 1, got {a}"
                    )))
                }
            }
            MeasureSpec::TrigPolyWeight(c) => {
                if c.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::InvalidMeasure(
                        "trig-poly coefficients must be finite".into(),
                    ))
                }
            }
            MeasureSpec::ExplicitVerblunsky(a) => a
                .iter()
                .enumerate()
                .try_for_each(|(i, &v)| check_alpha(i, v))
                .map_err(|e| Error::InvalidMeasure(e.to_string())),
            MeasureSpec::Reflected(inner) => inner.validate(),
        }
    }

    /// True when the measure has a pointwise weight.
    pub fn has_weight(&self) -> bool {
        match self {
            MeasureSpec::Lebesgue
            | MeasureSpec::BernsteinSzego(_)
            | MeasureSpec::TrigPolyWeight(_) => true,
            MeasureSpec::Geronimus(_) | MeasureSpec::ExplicitVerblunsky(_) => false,
            MeasureSpec::Reflected(inner) => inner.has_weight(),
        }
    }

    /// Stable textual identifier; parses back with [`FromStr`].
    pub fn id(&self) -> String {
        self.to_string()
    }

    /// A weight evaluator with its normalization precomputed.
    pub fn weight(&self) -> Result<Weight> {
        self.validate()?;
        let norm = match self.base_weight_family()? {
            (MeasureSpec::TrigPolyWeight(c), _) => {
                // The mass of an entire trigonometric exponential; the trapezoid rule is
                // spectrally accurate, so 4096 nodes are far more than enough.
                let g = 4096;
                let mass: f64 = (0..g)
                    .map(|j| trig_exponent(c, TAU * j as f64 / g as f64).exp())
                    .sum::<f64>()
                    * TAU
                    / g as f64;
                1.0 / mass
            }
            _ => 1.0,
        };
        Ok(Weight {
            spec: self.clone(),
            norm,
        })
    }

    /// Strips reflections, returning the underlying weight family and the accumulated shift.
    fn base_weight_family(&self) -> Result<(&MeasureSpec, f64)> {
        match self {
            MeasureSpec::Reflected(inner) => {
                let (base, shift) = inner.base_weight_family()?;
                Ok((base, shift + PI))
            }
            MeasureSpec::Geronimus(_) | MeasureSpec::ExplicitVerblunsky(_) => {
                Err(Error::Domain(format!(
                    "{self} is specified by Verblunsky coefficients and has no pointwise weight"
                )))
            }
            other => Ok((other, 0.0)),
        }
    }

    /// Trigonometric moments `c[0..=k]` on a `grid_size`-point trapezoid rule.
    pub fn moments(&self, k: usize, grid_size: usize) -> Result<MomentSeq> {
        let weight = self.weight()?;
        if grid_size < 2 * k + 2 {
            return Err(Error::Domain(format!(
                "grid of {grid_size} nodes cannot resolve {k} moments"
            )));
        }
        let c = if matches!(self, MeasureSpec::Lebesgue) {
            let mut c = vec![0.0; k + 1];
            c[0] = 1.0;
            c
        } else {
            let mut buf: Vec<Complex64> = (0..grid_size)
                .map(|j| Complex64::new(weight.eval(TAU * j as f64 / grid_size as f64), 0.0))
                .collect();
            FftPlanner::new()
                .plan_fft_forward(grid_size)
                .process(&mut buf);
            let c0 = buf[0].re;
            buf[..=k].iter().map(|z| z.re / c0).collect()
        };
        // Positive pivots of the Levinson recursion are equivalent to positive-definiteness
        // of every leading Toeplitz section.
        levinson(&c)?;
        Ok(MomentSeq { c, grid_size })
    }

    /// The first `m` Verblunsky coefficients.
    pub fn verblunsky(&self, m: usize) -> Result<VerblunskySeq> {
        if m == 0 {
            return Err(Error::Domain(
                "need at least one Verblunsky coefficient".into(),
            ));
        }
        self.validate()?;
        match self {
            MeasureSpec::Lebesgue => Ok(VerblunskySeq {
                alphas: vec![0.0; m],
                source: VerblunskySource::Explicit,
            }),
            MeasureSpec::Geronimus(a) => Ok(VerblunskySeq {
                alphas: vec![*a; m],
                source: VerblunskySource::Explicit,
            }),
            MeasureSpec::ExplicitVerblunsky(a) => {
                let mut alphas = a.clone();
                alphas.resize(m, 0.0);
                Ok(VerblunskySeq {
                    alphas,
                    source: VerblunskySource::Explicit,
                })
            }
            MeasureSpec::Reflected(inner) if !inner.has_weight() => {
                let inner = inner.verblunsky(m)?;
                Ok(VerblunskySeq {
                    alphas: reflect_alphas(&inner.alphas),
                    source: inner.source,
                })
            }
            _ => {
                let k = 2 * m + 2;
                let mom = self.moments(k, default_grid(k))?;
                let lev = levinson(&mom.c[..=m])?;
                Ok(VerblunskySeq {
                    alphas: lev.alphas,
                    source: VerblunskySource::Levinson,
                })
            }
        }
    }

    /// The measure `sigma` with `d sigma(xi) = d mu(-xi)`.
    ///
    /// Weight families map to the family member with weight `w(theta + pi)`; coefficient
    /// families pick up the sign pattern `alpha_m -> (-1)^{m+1} alpha_m`.
    pub fn reflect(&self) -> MeasureSpec {
        match self {
            MeasureSpec::Lebesgue => MeasureSpec::Lebesgue,
            MeasureSpec::BernsteinSzego(a) => MeasureSpec::BernsteinSzego(-a),
            MeasureSpec::TrigPolyWeight(c) => MeasureSpec::TrigPolyWeight(
                c.iter()
                    .enumerate()
                    .map(|(i, &v)| if i % 2 == 0 { -v } else { v })
                    .collect(),
            ),
            MeasureSpec::ExplicitVerblunsky(a) => {
                MeasureSpec::ExplicitVerblunsky(reflect_alphas(a))
            }
            MeasureSpec::Reflected(inner) => (**inner).clone(),
            MeasureSpec::Geronimus(_) => MeasureSpec::Reflected(Box::new(self.clone())),
        }
    }
}

/// `w(theta)` for a weight family, normalized to unit mass over `[0, 2 pi)`.
#[derive(Debug, Clone)]
pub struct Weight {
    spec: MeasureSpec,
    norm: f64,
}

impl Weight {
    pub fn eval(&self, theta: f64) -> f64 {
        let (base, shift) = self
            .spec
            .base_weight_family()
            .expect("weight constructed from a weight family");
        let th = theta + shift;
        let raw = match base {
            MeasureSpec::Lebesgue => 1.0 / TAU,
            MeasureSpec::BernsteinSzego(a) => {
                // |1 - a e^{i th}|^2 = 1 - 2a cos th + a^2
                (1.0 - a * a) / (TAU * (1.0 - 2.0 * a * th.cos() + a * a))
            }
            MeasureSpec::TrigPolyWeight(c) => trig_exponent(c, th).exp(),
            _ => unreachable!("base_weight_family only returns weight families"),
        };
        raw * self.norm
    }

    /// `ln w(theta)`, exact for the exponential family.
    pub fn ln_eval(&self, theta: f64) -> f64 {
        let (base, shift) = self
            .spec
            .base_weight_family()
            .expect("weight constructed from a weight family");
        match base {
            MeasureSpec::TrigPolyWeight(c) => trig_exponent(c, theta + shift) + self.norm.ln(),
            _ => self.eval(theta).ln(),
        }
    }
}

fn trig_exponent(c: &[f64], theta: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(i, &v)| v * ((i + 1) as f64 * theta).cos())
        .sum()
}

/// Evaluates the weight of `spec` at `theta`.
pub fn weight_at(spec: &MeasureSpec, theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!("theta must be finite, got {theta}")));
    }
    Ok(spec.weight()?.eval(theta))
}

/// Output of [`levinson`].
#[derive(Debug, Clone)]
pub struct Levinson {
    pub alphas: Vec<f64>,
    /// Monic coefficient vectors of `Phi_0 .. Phi_M`, lowest degree first.
    pub monic: Vec<Vec<f64>>,
    /// `||Phi_m||^2` in `L^2(mu)`, the Levinson pivots.
    pub norms: Vec<f64>,
}

/// Runs the Szegő recursion `Phi_{m+1} = z Phi_m - alpha_m Phi_m^*` on moment data.
///
/// With `<f, g> = int f conj(g) d mu`, orthogonality of `Phi_{m+1}` to the constants gives
/// `alpha_m = sum_j p_j c_{j+1} / ||Phi_m||^2` and `||Phi_{m+1}||^2 = (1 - alpha_m^2) ||Phi_m||^2`.
pub fn levinson(c: &[f64]) -> Result<Levinson> {
    if c.is_empty() || (c[0] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidMeasure(
            "moments must start with c[0] = 1".into(),
        ));
    }
    let m_max = c.len() - 1;
    let mut p = vec![1.0];
    let mut d = 1.0;
    let mut alphas = Vec::with_capacity(m_max);
    let mut monic = vec![p.clone()];
    let mut norms = vec![d];
    for m in 0..m_max {
        let num: f64 = p.iter().enumerate().map(|(j, pj)| pj * c[j + 1]).sum();
        let alpha = num / d;
        if !(alpha.abs() < 1.0) {
            return Err(Error::NotPositiveDefinite {
                order: m + 1,
                pivot: d * (1.0 - alpha * alpha),
            });
        }
        let mut next = vec![0.0; m + 2];
        for j in 0..=m {
            next[j + 1] += p[j];
            next[j] -= alpha * p[m - j];
        }
        p = next;
        d *= 1.0 - alpha * alpha;
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite {
                order: m + 1,
                pivot: d,
            });
        }
        alphas.push(alpha);
        monic.push(p.clone());
        norms.push(d);
    }
    Ok(Levinson {
        alphas,
        monic,
        norms,
    })
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::Lebesgue => write!(f, "lebesgue"),
            MeasureSpec::Geronimus(a) => write!(f, "geronimus:{a}"),
            MeasureSpec::BernsteinSzego(a) => write!(f, "bernstein-szego:{a}"),
            MeasureSpec::TrigPolyWeight(c) => write!(f, "trig-poly:{}", fmt_list(c)),
            MeasureSpec::ExplicitVerblunsky(a) => write!(f, "verblunsky:{}", fmt_list(a)),
            MeasureSpec::Reflected(inner) => write!(f, "reflect:{inner}"),
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    /// Parses `family[:p1,p2,...]`, e.g. `geronimus:0.3` or `reflect:bernstein-szego:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, params) = match s.split_once(':') {
            Some((f, p)) => (f.trim(), Some(p.trim())),
            None => (s, None),
        };
        let bad = |msg: String| Error::InvalidMeasure(msg);
        let list = |p: Option<&str>| -> Result<Vec<f64>> {
            match p {
                None | Some("") => Ok(Vec::new()),
                Some(p) => p
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| bad(format!("cannot parse parameter {x:?} in {s:?}")))
                    })
                    .collect(),
            }
        };
        let scalar = |p: Option<&str>| -> Result<f64> {
            match list(p)?.as_slice() {
                [a] => Ok(*a),
                _ => Err(bad(format!("{family} takes exactly one parameter"))),
            }
        };
        let spec = match family.to_ascii_lowercase().as_str() {
            "lebesgue" | "kac" => {
                if params.is_some_and(|p| !p.is_empty()) {
                    return Err(bad("lebesgue takes no parameters".into()));
                }
                MeasureSpec::Lebesgue
            }
            "geronimus" => MeasureSpec::Geronimus(scalar(params)?),
            "bernstein-szego" | "bs" => MeasureSpec::BernsteinSzego(scalar(params)?),
            "trig-poly" | "trig" => MeasureSpec::TrigPolyWeight(list(params)?),
            "verblunsky" => MeasureSpec::ExplicitVerblunsky(list(params)?),
            "reflect" => {
                let inner = params.ok_or_else(|| bad("reflect needs an inner measure".into()))?;
                MeasureSpec::Reflected(Box::new(inner.parse()?))
            }
            other => return Err(bad(format!("unknown measure family {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
