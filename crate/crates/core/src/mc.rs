//! Monte Carlo oracle for `E_n`: sample `P_n = sum eta_i phi_i` with i.i.d. standard normal
//! `eta_i` and count real roots.
//!
//! Roots are eigenvalues of the confederate matrix of `P_n` in the orthonormal basis (see
//! [`OpucBasis::confederate`]). The monomial companion matrix is kept for direct use: for
//! measures such as Geronimus the monomial coefficients of `phi_n` reach `1e14` at `n = 128`
//! while `P_n` is of order one near the circle, and the resulting eigenvalue errors turn close
//! real pairs into complex ones.
//!
//! Every sample draws from its own ChaCha stream, selected by the sample index on a generator
//! seeded with the user seed, so results do not depend on scheduling or thread count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::MeasureSpec;
use crate::opuc::OpucBasis;
use crate::roots::{hessenberg_eigenvalues, roots};

/// Largest degree accepted by the sampler; each sample costs `O(n^3)`.
pub const MC_N_MAX: usize = 256;

/// Largest tolerated fraction of failed samples.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub im_tol: f64,
}

impl McConfig {
    pub fn new(n: usize, samples: usize, seed: u64) -> Self {
        McConfig {
            n,
            samples,
            seed,
            im_tol: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Domain("need at least one sample".into()));
        }
        if !(self.im_tol > 0.0) {
            return Err(Error::Domain(format!(
                "im_tol must be positive, got {}",
                self.im_tol
            )));
        }
        if self.n == 0 || self.n > MC_N_MAX {
            return Err(Error::Domain(format!(
                "Monte Carlo degree must be in 1..={MC_N_MAX}, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McStats {
    pub spec_id: String,
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub samples_used: usize,
    pub failed: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Number of samples with each real-root count.
    pub histogram: BTreeMap<usize, u64>,
    /// Samples whose count has the wrong parity for their effective degree.
    pub parity_mismatches: usize,
}

/// The RNG stream of sample `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `sum eta_i rows[i]` for given weights.
pub fn combine(rows: &[Vec<f64>], eta: &[f64]) -> Vec<f64> {
    let n = rows.len() - 1;
    let mut c = vec![0.0; n + 1];
    for (row, &e) in rows.iter().zip(eta) {
        for (cj, rj) in c.iter_mut().zip(row) {
            *cj += e * rj;
        }
    }
    c
}

/// `n + 1` independent standard normal weights.
pub fn sample_eta<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..=n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Monomial coefficients of a random `P_n` built from the rows of [`OpucBasis::monomial_coeffs`].
pub fn sample_poly<R: Rng>(rows: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    combine(rows, &sample_eta(rows.len() - 1, rng))
}

/// Real roots of `sum coeffs[k] x^k`, classified by `|Im z| <= im_tol (1 + |z|)`.
pub fn count_real_zeros(coeffs: &[f64], im_tol: f64) -> Result<usize> {
    Ok(roots(coeffs)?
        .iter()
        .filter(|z| z.im.abs() <= im_tol * (1.0 + z.norm()))
        .count())
}

/// Real roots of `sum eta[j] phi_j`, classified as in [`count_real_zeros`], together with the
/// degree of the polynomial.
pub fn count_real_zeros_in_basis(
    basis: &OpucBasis,
    eta: &[f64],
    im_tol: f64,
) -> Result<(usize, usize)> {
    let (a, d) = basis.confederate(eta)?;
    let k = hessenberg_eigenvalues(a, d)?
        .iter()
        .filter(|z| z.im.abs() <= im_tol * (1.0 + z.norm()))
        .count();
    Ok((k, d))
}

/// Runs the Monte Carlo experiment.
pub fn run_mc(spec: &MeasureSpec, cfg: &McConfig) -> Result<McStats> {
    cfg.validate()?;
    let basis = OpucBasis::from_spec(spec, cfg.n)?;
    let outcomes: Vec<Option<(usize, usize)>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, i);
            let eta = sample_eta(cfg.n, &mut rng);
            match count_real_zeros_in_basis(&basis, &eta, cfg.im_tol) {
                Ok(kd) => Some(kd),
                Err(e) => {
                    log::debug!("sample {i} failed: {e}");
                    None
                }
            }
        })
        .collect();

    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    if failed as f64 > MAX_FAILURE_RATE * cfg.samples as f64 {
        return Err(Error::SampleFailures {
            failed,
            total: cfg.samples,
        });
    }
    let mut histogram = BTreeMap::new();
    let (mut sum, mut sumsq, mut parity_mismatches) = (0u128, 0u128, 0usize);
    for &(k, degree) in outcomes.iter().flatten() {
        *histogram.entry(k).or_insert(0u64) += 1;
        sum += k as u128;
        sumsq += (k * k) as u128;
        if k % 2 != degree % 2 {
            parity_mismatches += 1;
        }
    }
    let used = outcomes.len() - failed;
    let nf = used as f64;
    let mean = sum as f64 / nf;
    // Exact integer arithmetic keeps a zero variance exactly zero.
    let stderr = if used > 1 {
        let num = used as u128 * sumsq - sum * sum;
        (num as f64 / (nf * (nf - 1.0))).sqrt() / nf.sqrt()
    } else {
        0.0
    };
    Ok(McStats {
        spec_id: spec.id(),
        n: cfg.n,
        seed: cfg.seed,
        samples: cfg.samples,
        samples_used: used,
        failed,
        mean,
        stderr,
        histogram,
        parity_mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expect::expect_total;
    use crate::roots::sturm_count;

    #[test]
    fn counting_examples() {
        assert_eq!(count_real_zeros(&[-1.0, 0.0, 1.0], 1e-8).unwrap(), 2);
        assert_eq!(count_real_zeros(&[1.0, 0.0, 1.0], 1e-8).unwrap(), 0);
        assert_eq!(count_real_zeros(&[-6.0, 11.0, -6.0, 1.0], 1e-8).unwrap(), 3);
        assert!(count_real_zeros(&[0.0, 0.0, 0.0], 1e-8).is_err());
    }

    #[test]
    fn sample_poly_examples() {
        let b = OpucBasis::from_spec(&MeasureSpec::Geronimus(0.3), 4).unwrap();
        let rows = b.monomial_coeffs(4).unwrap();
        assert_eq!(
            combine(&rows, &[1.0, 0.0, 0.0, 0.0, 0.0]),
            vec![1.0, 0.0, 0.0, 0.0, 0.0]
        );
        let leb = OpucBasis::new(vec![0.0])
            .unwrap()
            .monomial_coeffs(1)
            .unwrap();
        assert_eq!(combine(&leb, &[1.0, 1.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn coefficient_covariance_matches_gram_sum() {
        let b = OpucBasis::from_spec(&MeasureSpec::Geronimus(0.3), 3).unwrap();
        let rows = b.monomial_coeffs(3).unwrap();
        let draws = 100_000;
        let d = 4;
        let samples: Vec<Vec<f64>> = (0..draws as u64)
            .map(|i| sample_poly(&rows, &mut sample_rng(11, i)))
            .collect();
        for j in 0..d {
            for k in 0..d {
                let want: f64 = rows
                    .iter()
                    .map(|r| r.get(j).copied().unwrap_or(0.0) * r.get(k).copied().unwrap_or(0.0))
                    .sum();
                let prods: Vec<f64> = samples.iter().map(|c| c[j] * c[k]).collect();
                let m = prods.iter().sum::<f64>() / draws as f64;
                let var = prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
                let se = (var / draws as f64).sqrt();
                assert!(
                    (m - want).abs() <= 5.0 * se,
                    "({j},{k}): {m} vs {want} (se {se})"
                );
            }
        }
    }

    #[test]
    fn degree_one_always_has_one_root() {
        let s = run_mc(&MeasureSpec::Lebesgue, &McConfig::new(1, 1000, 42)).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.stderr, 0.0);
        assert_eq!(s.histogram.get(&1), Some(&1000));
    }

    #[test]
    fn reproducible_and_parity_consistent() {
        let spec = MeasureSpec::BernsteinSzego(0.5);
        let cfg = McConfig::new(17, 500, 9);
        let a = run_mc(&spec, &cfg).unwrap();
        let b = run_mc(&spec, &cfg).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let c = pool.install(|| run_mc(&spec, &cfg)).unwrap();
        assert_eq!(a.histogram, c.histogram);
        assert!(a.histogram.keys().all(|&k| k <= 17));
        assert!(a.parity_mismatches as f64 <= 1e-3 * a.samples_used as f64);
    }

    #[test]
    fn lebesgue_n32_agrees_with_quadrature_and_is_threshold_insensitive() {
        let spec = MeasureSpec::Lebesgue;
        let s = run_mc(&spec, &McConfig::new(32, 10_000, 2024)).unwrap();
        let e = expect_total(&spec, 32, 1e-10).unwrap().value;
        assert!(
            (s.mean - e).abs() <= 3.0 * s.stderr,
            "{} vs {e} (se {})",
            s.mean,
            s.stderr
        );
        let mut cfg = McConfig::new(32, 10_000, 2024);
        cfg.im_tol = 2e-8;
        let d = run_mc(&spec, &cfg).unwrap();
        assert!((d.mean - s.mean).abs() < s.stderr);
    }

    #[test]
    fn basis_and_monomial_counts_agree_on_low_degrees() {
        for spec in [MeasureSpec::Geronimus(0.3), MeasureSpec::TrigPolyWeight(vec![0.4, -0.3])] {
            let b = OpucBasis::from_spec(&spec, 12).unwrap();
            let rows = b.monomial_coeffs(12).unwrap();
            let mut disagree = 0;
            for i in 0..500 {
                let eta = sample_eta(12, &mut sample_rng(8, i));
                let (k, d) = count_real_zeros_in_basis(&b, &eta, 1e-8).unwrap();
                assert_eq!(d, 12);
                if k != count_real_zeros(&combine(&rows, &eta), 1e-8).unwrap() {
                    disagree += 1;
                }
            }
            assert!(disagree <= 1, "{spec}: {disagree} disagreements");
        }
    }

    #[test]
    fn sturm_oracle_agrees_on_low_degrees() {
        let b = OpucBasis::from_spec(&MeasureSpec::Geronimus(0.3), 10).unwrap();
        let rows = b.monomial_coeffs(10).unwrap();
        let mut disagree = 0;
        for i in 0..500 {
            let c = sample_poly(&rows, &mut sample_rng(5, i));
            let eig = count_real_zeros(&c, 1e-8).unwrap();
            let st = sturm_count(&c, -1e6, 1e6).unwrap();
            if eig != st {
                disagree += 1;
            }
        }
        assert!(disagree <= 2, "{disagree} disagreements");
    }
}
