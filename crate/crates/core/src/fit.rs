//! Ladders of `E_n` values and least-squares fits of the large-`n` expansion
//! `E_n = slope log(n+1) + a_0 + a_1 (n+1)^{-1} + ... + a_P (n+1)^{-P}`.

use std::collections::HashMap;
use std::f64::consts::FRAC_2_PI;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expect::expect_total;
use crate::measure::MeasureSpec;

/// Environment variable overriding the results file location.
pub const CACHE_ENV: &str = "OPUC_ZEROS_CACHE";
/// Results file used when [`CACHE_ENV`] is unset.
pub const DEFAULT_CACHE_FILE: &str = "opuc_zeros_results.jsonl";

/// Largest expansion order the fit accepts.
pub const P_MAX: usize = 4;
/// Fits whose scaled design matrix has a larger condition number are rejected.
pub const COND_MAX: f64 = 1e12;
/// Residual bound for an accepted fit. The truncated `(n+1)^{-P-1}` term of an analytic weight
/// leaves residuals near `1e-5` at `n = 16` with `P = 2`.
pub const FIT_TOL: f64 = 1e-4;
/// Errors below this floor are not trusted when forming weights.
const ERR_FLOOR: f64 = 1e-13;

/// One rung of a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub n: usize,
    pub value: f64,
    pub err: f64,
    /// Set when quadrature stopped short of its tolerance; the value is the best available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A persisted `E_n` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub spec_id: String,
    pub n: usize,
    pub tol: f64,
    pub value: f64,
    pub err: f64,
    pub timestamp: u64,
}

/// Append-only JSON-lines results file.
#[derive(Debug, Clone)]
pub struct ResultCache {
    path: PathBuf,
}

type Key = (String, usize, u64);

impl ResultCache {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ResultCache { path: path.into() }
    }

    /// The file named by `OPUC_ZEROS_CACHE`, or `./opuc_zeros_results.jsonl`.
    pub fn from_env() -> Self {
        Self::new(
            std::env::var_os(CACHE_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| DEFAULT_CACHE_FILE.into()),
        )
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All records, later ones shadowing earlier ones. Unparsable lines are skipped.
    pub fn load(&self) -> Result<HashMap<Key, CacheRecord>> {
        let mut map = HashMap::new();
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(map),
            Err(e) => return Err(e.into()),
        };
        for line in BufReader::new(file).lines() {
            let line = line?;
            match serde_json::from_str::<CacheRecord>(&line) {
                Ok(r) => {
                    map.insert((r.spec_id.clone(), r.n, r.tol.to_bits()), r);
                }
                Err(e) if !line.trim().is_empty() => {
                    log::warn!("skipping malformed cache line: {e}")
                }
                Err(_) => {}
            }
        }
        Ok(map)
    }

    pub fn append(&self, records: &[CacheRecord]) -> Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?);
            buf.push('\n');
        }
        f.write_all(buf.as_bytes())?;
        Ok(())
    }
}

/// Powers of two from `lo` to `hi` inclusive, `lo` and `hi` themselves powers of two.
pub fn geometric_ns(lo: usize, hi: usize) -> Result<Vec<usize>> {
    if lo == 0 || !lo.is_power_of_two() || !hi.is_power_of_two() || hi < lo {
        return Err(Error::Domain(format!(
            "geometric ladder needs powers of two lo <= hi, got {lo}:{hi}"
        )));
    }
    Ok(std::iter::successors(Some(lo), |&n| (n < hi).then_some(2 * n)).collect())
}

/// The default ladder `2^4, ..., 2^12`.
pub fn default_ns() -> Vec<usize> {
    geometric_ns(16, 4096).expect("valid constant ladder")
}

/// `E_n` for every `n` in `ns`, served from `cache` when a record with the same
/// `(spec_id, n, tol)` exists and appended to it otherwise.
pub fn ladder(
    spec: &MeasureSpec,
    ns: &[usize],
    tol: f64,
    cache: Option<&ResultCache>,
) -> Result<Vec<LadderRow>> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "ladder degrees must be non-empty and strictly increasing".into(),
        ));
    }
    let id = spec.id();
    let known = match cache {
        Some(c) => c.load()?,
        None => HashMap::new(),
    };
    let rows: Vec<(LadderRow, bool)> = ns
        .par_iter()
        .map(|&n| {
            if let Some(r) = known.get(&(id.clone(), n, tol.to_bits())) {
                return Ok((
                    LadderRow {
                        n,
                        value: r.value,
                        err: r.err,
                        note: None,
                    },
                    true,
                ));
            }
            match expect_total(spec, n, tol) {
                Ok(e) => Ok((
                    LadderRow {
                        n,
                        value: e.value,
                        err: e.err_est,
                        note: None,
                    },
                    false,
                )),
                Err(Error::NoConvergence { value, err, .. }) => Ok((
                    LadderRow {
                        n,
                        value,
                        err,
                        note: Some(format!("quadrature error {err:e} above tolerance {tol:e}")),
                    },
                    false,
                )),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    if let Some(c) = cache {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let fresh: Vec<CacheRecord> = rows
            .iter()
            .filter(|(r, hit)| !hit && r.note.is_none())
            .map(|(r, _)| CacheRecord {
                spec_id: id.clone(),
                n: r.n,
                tol,
                value: r.value,
                err: r.err,
                timestamp,
            })
            .collect();
        c.append(&fresh)?;
    }
    Ok(rows.into_iter().map(|(r, _)| r).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub slope: f64,
    /// Uncertainty of `slope`; zero when it was fixed.
    pub slope_err: f64,
    pub fixed_slope: bool,
    /// `a[p]` multiplies `(n+1)^{-p}`.
    pub a: Vec<f64>,
    pub a_err: Vec<f64>,
    pub resid_max: f64,
    pub cond: f64,
    /// `resid_max <= FIT_TOL`.
    pub accepted: bool,
    pub ladder: Vec<(usize, f64)>,
}

/// Weighted least squares for the expansion model with `p` inverse powers.
///
/// Weights are `1/err` of each row. With `fix_slope` the term `(2/pi) log(n+1)` is moved to the
/// data side. Columns are scaled to unit norm before an SVD solve; the reported condition
/// number is that of the scaled matrix. Uncertainties come from the covariance of the weighted
/// problem, inflated by the reduced chi-square when it exceeds one.
pub fn fit_expansion(rows: &[LadderRow], p: usize, fix_slope: bool) -> Result<ExpansionFit> {
    if p > P_MAX {
        return Err(Error::Domain(format!(
            "expansion order {p} exceeds {P_MAX}"
        )));
    }
    if rows.len() < p + 3 {
        return Err(Error::Domain(format!(
            "need at least {} ladder rows for P = {p}, got {}",
            p + 3,
            rows.len()
        )));
    }
    let offset = usize::from(!fix_slope);
    let ncol = p + 1 + offset;
    let m = rows.len();
    let mut a = DMatrix::<f64>::zeros(m, ncol);
    let mut y = DVector::<f64>::zeros(m);
    for (i, r) in rows.iter().enumerate() {
        let w = 1.0 / r.err.max(ERR_FLOOR);
        let np1 = (r.n + 1) as f64;
        if fix_slope {
            y[i] = w * (r.value - FRAC_2_PI * np1.ln());
        } else {
            y[i] = w * r.value;
            a[(i, 0)] = w * np1.ln();
        }
        for q in 0..=p {
            a[(i, offset + q)] = w * np1.powi(-(q as i32));
        }
    }
    let scale: Vec<f64> = (0..ncol).map(|j| a.column(j).norm()).collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = sv.max() / sv.min();
    if !(cond <= COND_MAX) {
        return Err(Error::IllConditioned(format!(
            "fit condition number {cond:e} exceeds {COND_MAX:e}; reduce the expansion order P"
        )));
    }
    let coef = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let resid_w = &y - &a * &coef;
    let dof = m - ncol;
    let chi2 = resid_w.norm_squared();
    let inflate = if dof > 0 {
        (chi2 / dof as f64).max(1.0)
    } else {
        1.0
    };
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let var: Vec<f64> = (0..ncol)
        .map(|j| {
            (0..ncol)
                .map(|k| (v_t[(k, j)] / sv[k]).powi(2))
                .sum::<f64>()
                * inflate
        })
        .collect();
    let beta: Vec<f64> = (0..ncol).map(|j| coef[j] / scale[j]).collect();
    let beta_err: Vec<f64> = (0..ncol).map(|j| var[j].sqrt() / scale[j]).collect();
    let (slope, slope_err) = if fix_slope {
        (FRAC_2_PI, 0.0)
    } else {
        (beta[0], beta_err[0])
    };
    let resid_max = rows
        .iter()
        .map(|r| {
            let np1 = (r.n + 1) as f64;
            let model = slope * np1.ln()
                + beta[offset..]
                    .iter()
                    .enumerate()
                    .map(|(q, c)| c * np1.powi(-(q as i32)))
                    .sum::<f64>();
            (r.value - model).abs()
        })
        .fold(0.0, f64::max);
    Ok(ExpansionFit {
        slope,
        slope_err,
        fixed_slope: fix_slope,
        a: beta[offset..].to_vec(),
        a_err: beta_err[offset..].to_vec(),
        resid_max,
        cond,
        accepted: resid_max <= FIT_TOL,
        ladder: rows.iter().map(|r| (r.n, r.value)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFit {
    pub spec_id: String,
    /// Fit with the slope pinned to `2/pi`.
    pub fixed: ExpansionFit,
    /// Fit with a free slope.
    pub free: ExpansionFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    pub fits: Vec<SpecFit>,
    /// `(spec_i, spec_j, a0_i - a0_j)` over all pairs, from the fixed-slope fits.
    pub a0_deltas: Vec<(String, String, f64)>,
    pub max_a0_delta: f64,
    /// `max |slope - 2/pi|` over the free-slope fits.
    pub max_slope_dev: f64,
}

/// Fits every measure on a common ladder and compares the constant terms.
pub fn universality_report(
    specs: &[MeasureSpec],
    ns: &[usize],
    tol: f64,
    p: usize,
    cache: Option<&ResultCache>,
) -> Result<UniversalityReport> {
    if specs.len() < 2 {
        return Err(Error::Domain(
            "universality needs at least two measures".into(),
        ));
    }
    let mut fits = Vec::with_capacity(specs.len());
    for spec in specs {
        let rows = ladder(spec, ns, tol, cache)?;
        fits.push(SpecFit {
            spec_id: spec.id(),
            fixed: fit_expansion(&rows, p, true)?,
            free: fit_expansion(&rows, p, false)?,
        });
    }
    let mut a0_deltas = Vec::new();
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            a0_deltas.push((
                fits[i].spec_id.clone(),
                fits[j].spec_id.clone(),
                fits[i].fixed.a[0] - fits[j].fixed.a[0],
            ));
        }
    }
    let max_a0_delta = a0_deltas.iter().map(|d| d.2.abs()).fold(0.0, f64::max);
    let max_slope_dev = fits
        .iter()
        .map(|f| (f.free.slope - FRAC_2_PI).abs())
        .fold(0.0, f64::max);
    Ok(UniversalityReport {
        fits,
        a0_deltas,
        max_a0_delta,
        max_slope_dev,
    })
}
