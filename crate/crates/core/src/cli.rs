//! Command-line front end.
//!
//! Every subcommand resolves its parameters from flags first, then from an optional TOML
//! config file with the same key names, then from defaults. Results go to stdout or `--out`
//! as JSON (one object per line) or CSV (always with a header). Failures print one JSON line
//! on stderr and exit with status 2 for usage errors or 3 for numerical failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;
use crate::expect::{default_tol, expect_total};
use crate::fit::{
    default_ns, fit_expansion, geometric_ns, ladder, universality_report, ResultCache,
    P_MAX as FIT_P_MAX,
};
use crate::intensity::{density_grid, Method};
use crate::mc::{run_mc, McConfig};
use crate::measure::MeasureSpec;
use crate::opuc::OpucBasis;
use crate::special::a0_constant;
use crate::szego::{szego_from_weight, DEFAULT_K};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "opuc-zeros",
    version,
    about = "Real zeros of random OPUC polynomials"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML file supplying defaults for any flag (keys: measure, n, ns, samples, seed, tol,
    /// order, grid, m, format, out)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write results to this file instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Real-zero intensity rho_n on a uniform grid
    Density(DensityArgs),
    /// Expected number of real zeros E_n by quadrature
    Expect(ExpectArgs),
    /// Monte Carlo estimate of E_n
    Mc(McArgs),
    /// Fit the large-n expansion to a ladder of E_n values
    Fit(FitArgs),
    /// Compare fitted constant terms across measures
    Universality(UniversalityArgs),
    /// The universal constant A_0
    A0,
    /// Szegő data and scattering-function Taylor coefficients at z = 1
    Szego(SzegoArgs),
    /// Verblunsky coefficients of a measure
    Verblunsky(VerblunskyArgs),
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Measure, e.g. lebesgue, geronimus:0.3, bernstein-szego:0.5, trig-poly:0.2,0.1
    #[arg(long)]
    pub measure: Option<String>,
    /// Polynomial degree
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of grid points on [-xmax, xmax]
    #[arg(long)]
    pub grid: Option<usize>,
    /// Half-width of the grid
    #[arg(long, default_value_t = 2.0)]
    pub xmax: f64,
    /// Evaluation method
    #[arg(long, default_value = "blaschke")]
    pub method: Method,
}

#[derive(Debug, Args)]
pub struct ExpectArgs {
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Absolute quadrature tolerance (default 1e-10, or 1e-8 above n = 4096)
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of random polynomials
    #[arg(long)]
    pub samples: Option<usize>,
    /// RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// A root counts as real when |Im z| <= im_tol (1 + |z|)
    #[arg(long, default_value_t = 1e-8)]
    pub im_tol: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub measure: Option<String>,
    /// Degrees: comma list, or lo:hi:geometric for powers of two (default 16:4096:geometric)
    #[arg(long)]
    pub ns: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of inverse powers P in the model
    #[arg(long)]
    pub order: Option<usize>,
    /// Fit the slope of log(n+1) instead of fixing it to 2/pi
    #[arg(long)]
    pub free_slope: bool,
}

#[derive(Debug, Args)]
pub struct UniversalityArgs {
    /// Measures to compare; repeat the flag (at least two)
    #[arg(long)]
    pub measure: Vec<String>,
    #[arg(long)]
    pub ns: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SzegoArgs {
    #[arg(long)]
    pub measure: Option<String>,
    /// Taylor order of the scattering expansion (at most 6)
    #[arg(long)]
    pub order: Option<usize>,
    /// Number of Fourier coefficients of ln w
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerblunskyArgs {
    #[arg(long)]
    pub measure: Option<String>,
    /// Number of coefficients
    #[arg(long)]
    pub m: Option<usize>,
    /// Toeplitz quadrature grid size
    #[arg(long)]
    pub grid: Option<usize>,
}

/// Keys accepted in a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub measure: Option<StringOrList>,
    pub n: Option<usize>,
    pub ns: Option<NsValue>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub order: Option<usize>,
    pub grid: Option<usize>,
    pub m: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StringOrList {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NsValue {
    Text(String),
    List(Vec<usize>),
}

/// Failure of a CLI run, carrying its exit status.
#[derive(Debug)]
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match e {
            Error::Domain(_) => (EXIT_USAGE, "domain"),
            Error::InvalidMeasure(_) => (EXIT_USAGE, "invalid_measure"),
            Error::Io(_) => (EXIT_NUMERICAL, "io"),
            _ => (EXIT_NUMERICAL, "numerical"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

type Out<T> = std::result::Result<T, Failure>;

/// Parses `ns` as `a,b,c` or `lo:hi:geometric`.
pub fn parse_ns(s: &str) -> crate::Result<Vec<usize>> {
    let bad = || Error::Domain(format!("cannot parse degree list {s:?}"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [lo, hi, "geometric"] => geometric_ns(
            lo.parse().map_err(|_| bad())?,
            hi.parse().map_err(|_| bad())?,
        ),
        [list] => list
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect(),
        _ => Err(bad()),
    }
}

struct Ctx {
    file: FileConfig,
}

impl Ctx {
    fn measure(&self, flag: &Option<String>) -> Out<MeasureSpec> {
        let text = match (flag, &self.file.measure) {
            (Some(s), _) => s.clone(),
            (None, Some(StringOrList::One(s))) => s.clone(),
            (None, Some(StringOrList::Many(_))) => {
                return Err(Failure::usage(
                    "config lists several measures but this subcommand takes one",
                ))
            }
            (None, None) => return Err(Failure::usage("missing --measure")),
        };
        let spec: MeasureSpec = text.parse()?;
        spec.validate()?;
        Ok(spec)
    }

    fn measures(&self, flags: &[String]) -> Out<Vec<MeasureSpec>> {
        let texts: Vec<String> = if !flags.is_empty() {
            flags.to_vec()
        } else {
            match &self.file.measure {
                Some(StringOrList::Many(v)) => v.clone(),
                Some(StringOrList::One(s)) => vec![s.clone()],
                None => Vec::new(),
            }
        };
        texts
            .iter()
            .map(|t| {
                let spec: MeasureSpec = t.parse()?;
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }

    fn n(&self, flag: Option<usize>) -> Out<usize> {
        flag.or(self.file.n)
            .ok_or_else(|| Failure::usage("missing --n"))
    }

    fn ns(&self, flag: &Option<String>) -> Out<Vec<usize>> {
        Ok(match (flag, &self.file.ns) {
            (Some(s), _) | (None, Some(NsValue::Text(s))) => parse_ns(s)?,
            (None, Some(NsValue::List(v))) => v.clone(),
            (None, None) => default_ns(),
        })
    }

    fn tol(&self, flag: Option<f64>, fallback: f64) -> Out<f64> {
        let t = flag.or(self.file.tol).unwrap_or(fallback);
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::usage(format!(
                "tolerance must be positive, got {t}"
            )));
        }
        Ok(t)
    }
}

/// `(x, rho)` row of a density table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub x: f64,
    pub rho: f64,
    pub method: Method,
    pub n: usize,
    pub spec_id: String,
}

/// Output of the `szego` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SzegoReport {
    pub spec_id: String,
    pub tau: f64,
    pub rho: f64,
    pub tail: f64,
    /// Coefficients of `(1 - z)^p` in `S`, `p = 1..`.
    pub s: Vec<f64>,
    /// Coefficients of `(1 - z)^p` in `ln S`.
    pub c: Vec<f64>,
    pub residual: f64,
}

/// Output of the `verblunsky` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerblunskyReport {
    pub spec_id: String,
    pub alphas: Vec<f64>,
    pub decay_slope: Option<f64>,
}

/// Records to emit: either a single JSON document per record or table rows.
struct Emission {
    json: Vec<Value>,
    csv: Vec<Value>,
}

impl Emission {
    fn single<T: Serialize>(v: &T) -> Out<Self> {
        let v = to_value(v)?;
        Ok(Emission {
            json: vec![v.clone()],
            csv: vec![v],
        })
    }
}

fn to_value<T: Serialize>(v: &T) -> Out<Value> {
    serde_json::to_value(v).map_err(|e| Failure {
        code: EXIT_NUMERICAL,
        kind: "io",
        message: e.to_string(),
    })
}

fn check_fit_shape(rungs: usize, p: usize) -> Out<()> {
    if p > FIT_P_MAX || rungs < p + 3 {
        return Err(Failure::usage(format!(
            "a fit of order {p} needs order <= {FIT_P_MAX} and at least {} ladder degrees, got {rungs}",
            p + 3
        )));
    }
    Ok(())
}

fn dispatch(cli: &Cli, ctx: &Ctx) -> Out<Emission> {
    match &cli.command {
        Command::Density(a) => {
            let spec = ctx.measure(&a.measure)?;
            let n = ctx.n(a.n)?;
            let points = a.grid.or(ctx.file.grid).unwrap_or(201);
            if points < 2 || !(a.xmax > 0.0 && a.xmax.is_finite()) {
                return Err(Failure::usage(
                    "density needs --grid >= 2 and a positive --xmax",
                ));
            }
            let xs: Vec<f64> = (0..points)
                .map(|i| -a.xmax + 2.0 * a.xmax * i as f64 / (points - 1) as f64)
                .collect();
            let basis = OpucBasis::from_spec(&spec, n + 1)?;
            let grid = density_grid(&basis, n, &xs, a.method)?;
            let rows = grid
                .xs
                .iter()
                .zip(&grid.rho)
                .map(|(&x, &rho)| {
                    to_value(&DensityRow {
                        x,
                        rho,
                        method: grid.method,
                        n,
                        spec_id: grid.spec_id.clone(),
                    })
                })
                .collect::<Out<Vec<_>>>()?;
            Ok(Emission {
                json: vec![to_value(&grid)?],
                csv: rows,
            })
        }
        Command::Expect(a) => {
            let spec = ctx.measure(&a.measure)?;
            let n = ctx.n(a.n)?;
            let tol = ctx.tol(a.tol, default_tol(n))?;
            Emission::single(&expect_total(&spec, n, tol)?)
        }
        Command::Mc(a) => {
            let spec = ctx.measure(&a.measure)?;
            let n = ctx.n(a.n)?;
            let mut cfg = McConfig::new(
                n,
                a.samples.or(ctx.file.samples).unwrap_or(10_000),
                a.seed.or(ctx.file.seed).unwrap_or(0),
            );
            cfg.im_tol = a.im_tol;
            Emission::single(&run_mc(&spec, &cfg)?)
        }
        Command::Fit(a) => {
            let spec = ctx.measure(&a.measure)?;
            let ns = ctx.ns(&a.ns)?;
            let tol = ctx.tol(a.tol, 1e-10)?;
            let p = a.order.or(ctx.file.order).unwrap_or(2);
            check_fit_shape(ns.len(), p)?;
            let cache = ResultCache::from_env();
            let rows = ladder(&spec, &ns, tol, Some(&cache))?;
            Emission::single(&fit_expansion(&rows, p, !a.free_slope)?)
        }
        Command::Universality(a) => {
            let specs = ctx.measures(&a.measure)?;
            let ns = ctx.ns(&a.ns)?;
            let tol = ctx.tol(a.tol, 1e-10)?;
            let p = a.order.or(ctx.file.order).unwrap_or(2);
            check_fit_shape(ns.len(), p)?;
            if specs.len() < 2 {
                return Err(Failure::usage(
                    "universality needs at least two --measure flags",
                ));
            }
            let cache = ResultCache::from_env();
            Emission::single(&universality_report(&specs, &ns, tol, p, Some(&cache))?)
        }
        Command::A0 => Emission::single(&a0_constant()?),
        Command::Szego(a) => {
            let spec = ctx.measure(&a.measure)?;
            let k = a.m.or(ctx.file.m).unwrap_or(DEFAULT_K);
            let p = a.order.or(ctx.file.order).unwrap_or(2);
            let sz = szego_from_weight(&spec, k)?;
            let e = sz.scattering_expansion(p, 1e-3)?;
            Emission::single(&SzegoReport {
                spec_id: spec.id(),
                tau: sz.tau,
                rho: sz.rho,
                tail: sz.tail,
                s: e.s,
                c: e.c,
                residual: e.residual,
            })
        }
        Command::Verblunsky(a) => {
            let spec = ctx.measure(&a.measure)?;
            let m =
                a.m.or(ctx.file.m)
                    .ok_or_else(|| Failure::usage("missing --m"))?;
            if let Some(g) = a.grid.or(ctx.file.grid) {
                spec.moments(m, g)?;
            }
            let seq = spec.verblunsky(m)?;
            Emission::single(&VerblunskyReport {
                spec_id: spec.id(),
                decay_slope: seq.decay_slope(1e-14),
                alphas: seq.alphas,
            })
        }
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn render(em: &Emission, format: Format) -> Out<String> {
    match format {
        Format::Json => {
            let mut s = String::new();
            for v in &em.json {
                s.push_str(&v.to_string());
                s.push('\n');
            }
            Ok(s)
        }
        Format::Csv => {
            let header: Vec<String> = match em.csv.first() {
                Some(Value::Object(m)) => m.keys().cloned().collect(),
                _ => vec!["value".into()],
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Failure {
                code: EXIT_NUMERICAL,
                kind: "io",
                message: e.to_string(),
            };
            w.write_record(&header).map_err(io)?;
            for v in &em.csv {
                let row: Vec<String> = match v {
                    Value::Object(m) => header
                        .iter()
                        .map(|k| m.get(k).map(csv_cell).unwrap_or_default())
                        .collect(),
                    other => vec![csv_cell(other)],
                };
                w.write_record(&row).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Failure {
                code: EXIT_NUMERICAL,
                kind: "io",
                message: e.to_string(),
            })?;
            String::from_utf8(bytes).map_err(|e| Failure {
                code: EXIT_NUMERICAL,
                kind: "io",
                message: e.to_string(),
            })
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Out<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text).map_err(|e| {
                Failure::usage(format!("bad config {}: {}", path.display(), e.message()))
            })?
        }
        None => FileConfig::default(),
    };
    let format = cli.format.or(file.format).unwrap_or(Format::Json);
    let out = cli.out.clone().or_else(|| file.out.clone());
    let ctx = Ctx { file };
    let text = render(&dispatch(cli, &ctx)?, format)?;
    let io = |e: std::io::Error| Failure::from(Error::from(e));
    match out {
        Some(path) => fs::write(path, text).map_err(io),
        None => stdout.write_all(text.as_bytes()).map_err(io),
    }
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message.replace('\n', " ") }).to_string()
}

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", error_line("usage", first));
            return EXIT_USAGE;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "{}", error_line(f.kind, &f.message));
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ns_syntax() {
        assert_eq!(parse_ns("16:128:geometric").unwrap(), vec![16, 32, 64, 128]);
        assert_eq!(parse_ns("5, 9,12").unwrap(), vec![5, 9, 12]);
        assert!(parse_ns("a,b").is_err());
        assert!(parse_ns("16:128").is_err());
    }

    #[test]
    fn config_keys() {
        let cfg: FileConfig =
            toml::from_str("measure = \"geronimus:0.3\"\nn = 8\nns = [4, 8]\nformat = \"csv\"")
                .unwrap();
        assert_eq!(cfg.n, Some(8));
        assert_eq!(cfg.format, Some(Format::Csv));
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }

    #[test]
    fn csv_has_header_and_quotes_lists() {
        let em = Emission::single(&VerblunskyReport {
            spec_id: "lebesgue".into(),
            alphas: vec![0.0, 0.0],
            decay_slope: None,
        })
        .unwrap();
        let text = render(&em, Format::Csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("spec_id,alphas,decay_slope"));
        assert_eq!(lines.next(), Some("lebesgue,\"[0.0,0.0]\","));
    }
}
