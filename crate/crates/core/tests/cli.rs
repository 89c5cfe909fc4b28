use std::process::Command;

use opuc_zeros::cli::{run, VerblunskyReport, EXIT_OK, EXIT_USAGE};
use opuc_zeros::expect::ExpectationResult;
use opuc_zeros::fit::ExpansionFit;
use opuc_zeros::intensity::DensityGrid;
use opuc_zeros::mc::McStats;
use opuc_zeros::special::Estimate;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["opuc-zeros"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_opuc-zeros"))
}

#[test]
fn expect_degree_one() {
    let (code, out, _) = call(&["expect", "--measure", "lebesgue", "--n", "1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 1);
    let r: ExpectationResult = serde_json::from_str(out.trim()).unwrap();
    assert!((r.value - 1.0).abs() < 1e-9);
    assert_eq!(r.spec_id, "lebesgue");
}

#[test]
fn verblunsky_bernstein_szego() {
    let (code, out, _) = call(&["verblunsky", "--measure", "bernstein-szego:0.5", "--m", "4"]);
    assert_eq!(code, EXIT_OK);
    let r: VerblunskyReport = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(r.alphas.len(), 4);
    assert!((r.alphas[0] - 0.5).abs() < 1e-10);
    assert!(r.alphas[1..].iter().all(|a| a.abs() < 1e-10));
}

#[test]
fn a0_prints_value_and_error() {
    let (code, out, _) = call(&["a0"]);
    assert_eq!(code, EXIT_OK);
    let e: Estimate = serde_json::from_str(out.trim()).unwrap();
    assert!((e.value - 0.625_735_807_205_27).abs() < 1e-10);
    assert!(e.err < 1e-10);
}

#[test]
fn json_records_round_trip() {
    let (_, out, _) = call(&[
        "mc",
        "--measure",
        "geronimus:0.3",
        "--n",
        "6",
        "--samples",
        "300",
        "--seed",
        "5",
    ]);
    let stats: McStats = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(serde_json::to_string(&stats).unwrap(), out.trim());
    assert_eq!(stats.histogram.values().sum::<u64>(), 300);

    let (_, out, _) = call(&[
        "density",
        "--measure",
        "lebesgue",
        "--n",
        "3",
        "--grid",
        "5",
    ]);
    let grid: DensityGrid = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(grid.xs, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    assert_eq!(serde_json::to_string(&grid).unwrap(), out.trim());
}

#[test]
fn csv_has_header_and_one_row_per_point() {
    let (code, out, _) = call(&[
        "density",
        "--measure",
        "geronimus:0.3",
        "--n",
        "4",
        "--grid",
        "7",
        "--format",
        "csv",
    ]);
    assert_eq!(code, EXIT_OK);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        vec!["x", "rho", "method", "n", "spec_id"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 7);
    for r in &rows {
        let rho: f64 = r[1].parse().unwrap();
        assert!(rho > 0.0);
    }
}

#[test]
fn fit_uses_cache_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("results.jsonl");
    let run_fit = || {
        bin()
            .args([
                "fit",
                "--measure",
                "lebesgue",
                "--ns",
                "8,16,32,64,128",
                "--order",
                "1",
            ])
            .env("OPUC_ZEROS_CACHE", &cache)
            .output()
            .unwrap()
    };
    let first = run_fit();
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let fit: ExpansionFit = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(fit.ladder.len(), 5);
    assert_eq!(std::fs::read_to_string(&cache).unwrap().lines().count(), 5);
    let second = run_fit();
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(std::fs::read_to_string(&cache).unwrap().lines().count(), 5);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        format!(
            "measure = \"bernstein-szego:0.5\"\nm = 3\nformat = \"csv\"\nout = {:?}\n",
            out
        ),
    )
    .unwrap();
    let (code, stdout, _) = call(&["verblunsky", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("spec_id,alphas,decay_slope\n"));
    assert!(text.contains("bernstein-szego:0.5"));
    let (code, stdout, _) = call(&["verblunsky", "--m", "2", "--measure", "lebesgue"]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.contains("\"alphas\":[0.0,0.0]"));
}

#[test]
fn errors_are_single_json_lines_with_exit_codes() {
    let cases: [(&[&str], i32); 6] = [
        (
            &["expect", "--measure", "geronimus:1.2", "--n", "5"],
            EXIT_USAGE,
        ),
        (&["expect", "--measure", "lebesgue"], EXIT_USAGE),
        (&["expect", "--bogus"], EXIT_USAGE),
        (&["mc", "--measure", "lebesgue", "--n", "5000"], EXIT_USAGE),
        (&["szego", "--measure", "geronimus:0.3"], EXIT_USAGE),
        (
            &[
                "fit",
                "--measure",
                "lebesgue",
                "--ns",
                "16,32",
                "--order",
                "2",
            ],
            EXIT_USAGE,
        ),
    ];
    for (args, want) in cases {
        let (code, out, err) = call(args);
        assert_eq!(code, want, "{args:?}: {err}");
        assert!(out.is_empty());
        assert_eq!(err.lines().count(), 1, "{err}");
        let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert!(v["error"].is_string() && v["message"].is_string());
    }
}

#[test]
fn binary_exit_codes_and_help() {
    let help = bin().arg("--help").output().unwrap();
    assert!(help.status.success());
    let text = String::from_utf8(help.stdout).unwrap();
    for sub in [
        "density",
        "expect",
        "mc",
        "fit",
        "universality",
        "a0",
        "szego",
        "verblunsky",
    ] {
        assert!(text.contains(sub), "{sub}");
    }
    let sub_help =
        String::from_utf8(bin().args(["fit", "--help"]).output().unwrap().stdout).unwrap();
    for flag in [
        "--measure",
        "--ns",
        "--tol",
        "--order",
        "--format",
        "--out",
        "--config",
    ] {
        assert!(sub_help.contains(flag), "{flag}");
    }
    let bad = bin()
        .args(["expect", "--measure", "kac", "--n", "0"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
    let ok = bin()
        .args(["expect", "--measure", "kac", "--n", "3"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
}
