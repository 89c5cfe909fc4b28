//! One-dimensional quadrature.
//!
//! [`Adaptive`] is a globally adaptive Gauss-Kronrod (10/21 point) integrator in the style of
//! QUADPACK's `qag`: the interval with the largest error estimate is bisected until the summed
//! estimate meets the tolerance. [`GaussLegendre`] is a fixed composite rule used as an
//! independent cross-check.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Outcome of a quadrature call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err: f64,
    pub evals: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// Single 21-point Kronrod evaluation on `[a, b]`, returning `(value, error estimate)`.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_k - res_g) * half;
    let hl = half.abs();
    (res_k * half, rescale_error(err, res_abs * hl, res_asc * hl))
}

/// Globally adaptive Gauss-Kronrod integration.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive {
            abs_tol: 1e-12,
            rel_tol: 0.0,
            max_intervals: 2000,
        }
    }
}

impl Adaptive {
    pub fn with_tol(abs_tol: f64) -> Self {
        Adaptive {
            abs_tol,
            ..Default::default()
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<QuadResult> {
        self.integrate_with_breaks(f, &[a, b])
    }

    /// Integrates over `[breaks[0], breaks[last]]`, starting from the given partition.
    pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breaks: &[f64],
    ) -> Result<QuadResult> {
        if breaks.len() < 2 {
            return Err(Error::Domain("need at least two break points".into()));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) || breaks.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "break points must be finite and increasing: {breaks:?}"
            )));
        }
        let mut heap = BinaryHeap::new();
        // Segments too narrow to split further; their error is final.
        let mut frozen: Vec<Segment> = Vec::new();
        let mut evals = 0;
        for w in breaks.windows(2) {
            let (value, err) = gk21(&f, w[0], w[1]);
            evals += 21;
            heap.push(Segment {
                a: w[0],
                b: w[1],
                value,
                err,
            });
        }
        let totals = |heap: &BinaryHeap<Segment>, frozen: &[Segment]| {
            heap.iter()
                .chain(frozen.iter())
                .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.err))
        };
        let (mut total, mut total_err) = totals(&heap, &frozen);
        let mut count = heap.len();
        while total_err > self.abs_tol.max(self.rel_tol * total.abs()) && count < self.max_intervals
        {
            let Some(worst) = heap.pop() else { break };
            let mid = 0.5 * (worst.a + worst.b);
            if !(worst.a < mid && mid < worst.b) || (worst.b - worst.a) < 1e-14 * (1.0 + mid.abs())
            {
                frozen.push(worst);
                if heap.is_empty() {
                    break;
                }
                continue;
            }
            let (v1, e1) = gk21(&f, worst.a, mid);
            let (v2, e2) = gk21(&f, mid, worst.b);
            evals += 42;
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.err;
            heap.push(Segment {
                a: worst.a,
                b: mid,
                value: v1,
                err: e1,
            });
            heap.push(Segment {
                a: mid,
                b: worst.b,
                value: v2,
                err: e2,
            });
            count += 1;
            if count % 64 == 0 {
                (total, total_err) = totals(&heap, &frozen);
            }
        }
        let (total, total_err) = totals(&heap, &frozen);
        if !total.is_finite() {
            return Err(Error::Domain(
                "integrand produced a non-finite value".into(),
            ));
        }
        let tol = self.abs_tol.max(self.rel_tol * total.abs());
        if total_err > tol {
            return Err(Error::NoConvergence {
                value: total,
                err: total_err,
                tol,
            });
        }
        Ok(QuadResult {
            value: total,
            err: total_err,
            evals,
            intervals: heap.len() + frozen.len(),
        })
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Composite rule with `panels` equal panels on `[a, b]`.
    pub fn composite<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                let c = lo + 0.5 * h;
                0.5 * h
                    * self
                        .nodes
                        .iter()
                        .zip(&self.weights)
                        .map(|(x, w)| w * f(c + 0.5 * h * x))
                        .sum::<f64>()
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        // The Kronrod rule is exact through degree 31 and the embedded Gauss rule through 19,
        // so the error estimate only collapses to round-off when both are exact.
        let (v, _) = gk21(&|x: f64| x.powi(30), -1.0, 1.0);
        assert!((v - 2.0 / 31.0).abs() < 1e-15);
        let (v, e) = gk21(&|x: f64| x.powi(18), -1.0, 1.0);
        assert!((v - 2.0 / 19.0).abs() < 1e-15);
        assert!(e < 1e-13, "{e:e}");
        let (_, e) = gk21(&|x: f64| x.powi(20), -1.0, 1.0);
        assert!(e > 2.9e-6, "estimate must bound the Gauss error, got {e:e}");
    }

    #[test]
    fn adaptive_handles_peaks() {
        // The value is about 312, so 1e-10 absolute is near the round-off floor of the rule.
        let q = Adaptive::with_tol(1e-10)
            .integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0)
            .unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((q.value - exact).abs() < 1e-9, "{} vs {}", q.value, exact);
    }

    #[test]
    fn reports_non_convergence() {
        let q = Adaptive {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_intervals: 3,
        }
        .integrate(|x: f64| (1.0 / (x + 1e-3)).sin(), 0.0, 1.0);
        assert!(matches!(q, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn gauss_legendre_matches_known_rule() {
        let gl = GaussLegendre::new(2);
        assert!((gl.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((gl.weights[0] - 1.0).abs() < 1e-15);
        let gl = GaussLegendre::new(40);
        let v = gl.composite(|x: f64| x.exp(), 0.0, 1.0, 1);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-15);
        assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
