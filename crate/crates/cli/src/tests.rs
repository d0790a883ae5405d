//! In-process command tests. Goldens live in `tests/golden`; run with
//! `UPDATE_GOLDEN=1` to rewrite them after an intended change.

use std::path::{Path, PathBuf};

use catscope::Error;
use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::{dispatch, exit_code};

fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(std::iter::once("catscope").chain(args.iter().copied()))
}

fn run(args: &[&str]) -> catscope::Result<()> {
    dispatch(&parse(args).expect("valid command line"))
}

fn code(args: &[&str]) -> u8 {
    run(args).err().map_or(0, |e| exit_code(&e))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Synthetic data set in `dir`, with extra `synth` flags.
fn synth(dir: &Path, extra: &[&str]) -> (PathBuf, PathBuf) {
    let mut args = vec!["synth", "--out", s(dir)];
    args.extend_from_slice(extra);
    run(&args).unwrap();
    (dir.join("records.csv"), dir.join("schema.toml"))
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let mut rows = vec![header];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let k = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[k].clone()).collect()
}

#[test]
fn exit_codes_by_error_kind() {
    assert_eq!(exit_code(&Error::Precondition("x".into())), 1);
    assert_eq!(exit_code(&Error::Schema("x".into())), 3);
    assert_eq!(exit_code(&Error::EmptyGroup { side: "summer".into() }), 3);
    assert_eq!(exit_code(&Error::Convergence { sweeps: 100, residual: 1.0 }), 4);
    assert_eq!(exit_code(&Error::Degenerate("x".into())), 4);
}

#[test]
fn usage_errors_come_from_the_parser() {
    let e = parse(&["mca", "--dims"]).unwrap_err();
    assert_ne!(e.kind(), ErrorKind::DisplayHelp);
    assert!(parse(&["forecast", "--input", "x.csv", "--p", "2", "--p-max", "4"]).is_err());
    assert!(parse(&["ttest", "--input", "x.csv", "--from", "2012-13-01"]).is_err());
    assert!(parse(&["synth", "--assoc", "weather:vehicle_type"]).is_err());
    assert_eq!(parse(&["--help"]).unwrap_err().kind(), ErrorKind::DisplayHelp);
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    assert_eq!(code(&["ingest-check", "--input", s(&missing)]), 2);
    let schema = tmp.path().join("nope.toml");
    assert_eq!(code(&["ingest-check", "--input", s(&missing), "--schema", s(&schema)]), 2);
}

#[test]
fn unmapped_column_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, _) = synth(tmp.path(), &["--rows", "50"]);
    let schema = tmp.path().join("bad.toml");
    std::fs::write(&schema, "date = \"Date\"\nweather = \"Cloud_Cover\"\n").unwrap();
    assert_eq!(code(&["ingest-check", "--input", s(&input), "--schema", s(&schema)]), 3);
}

#[test]
fn invalid_association_strength_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&["synth", "--out", s(tmp.path()), "--assoc", "weather:vehicle_type:1.5"]), 1);
    assert!(!tmp.path().join("records.csv").exists());
}

#[test]
fn synth_is_reproducible_and_reingests_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let flags = ["--seed", "9", "--rows", "3000", "--assoc", "weather:vehicle_type:0.5"];
    let (a, schema) = synth(&tmp.path().join("a"), &flags);
    let (b, _) = synth(&tmp.path().join("b"), &flags);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (c, _) = synth(&tmp.path().join("c"), &["--seed", "10", "--rows", "3000"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());

    let loaded = crate::commands::load(&crate::args::InputArgs {
        input: a,
        schema: Some(schema),
        from: None,
        to: None,
        strict: true,
    })
    .unwrap();
    assert_eq!(loaded.table.valid_count(), 3000);
    assert_eq!(loaded.table.dropped(), 0);
}

#[test]
fn mca_reports_requested_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, schema) = synth(&tmp.path().join("data"), &["--rows", "2000"]);
    let out = tmp.path().join("out");
    run(&["mca", "--input", s(&input), "--schema", s(&schema), "--out", s(&out), "--dims", "2"]).unwrap();
    let cats = read_csv(&out.join("categories.csv"));
    assert_eq!(cats[0], ["variable", "category", "mass", "dim1", "dim2"]);
    let disc = read_csv(&out.join("discrimination.csv"));
    assert_eq!(disc[0], ["variable", "dim1", "dim2"]);
    // Column masses of the indicator matrix sum to one.
    let mass: f64 = column(&cats, "mass").iter().map(|m| m.parse::<f64>().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-9, "{mass}");
}

#[test]
fn benzecri_column_is_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, schema) = synth(&tmp.path().join("data"), &["--rows", "2000", "--assoc", "weather:vehicle_type:0.8"]);
    let plain = tmp.path().join("plain");
    let adjusted = tmp.path().join("adjusted");
    let vars = "weather,vehicle_type,driver_sex";
    run(&["mca", "--input", s(&input), "--schema", s(&schema), "--out", s(&plain), "--vars", vars]).unwrap();
    run(&["mca", "--input", s(&input), "--schema", s(&schema), "--out", s(&adjusted), "--vars", vars, "--benzecri"])
        .unwrap();
    assert_eq!(read_csv(&plain.join("inertias.csv"))[0], ["dim", "lambda", "percent"]);
    let rows = read_csv(&adjusted.join("inertias.csv"));
    let lambda: Vec<f64> = column(&rows, "lambda").iter().map(|x| x.parse().unwrap()).collect();
    let adj: Vec<f64> = column(&rows, "adjusted_percent").iter().map(|x| x.parse().unwrap()).collect();
    // Oracle: ((Q/(Q−1))(λ − 1/Q))² above 1/Q, renormalised to 100.
    let q = 3.0;
    let raw: Vec<f64> =
        lambda.iter().map(|l| if *l > 1.0 / q { (q / (q - 1.0) * (l - 1.0 / q)).powi(2) } else { 0.0 }).collect();
    let total: f64 = raw.iter().sum();
    for (a, r) in adj.iter().zip(&raw) {
        assert!((a - 100.0 * r / total).abs() < 1e-8, "{a} vs {}", 100.0 * r / total);
    }
}

#[test]
fn perfect_association_discriminates_fully() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, schema) =
        synth(&tmp.path().join("data"), &["--rows", "4000", "--assoc", "weather:vehicle_type:1"]);
    let out = tmp.path().join("out");
    run(&[
        "mca", "--input", s(&input), "--schema", s(&schema), "--out", s(&out), "--vars", "weather,vehicle_type",
    ])
    .unwrap();
    let disc = read_csv(&out.join("discrimination.csv"));
    for d in column(&disc, "dim1") {
        assert!((d.parse::<f64>().unwrap() - 1.0).abs() < 1e-9, "{d}");
    }
}

#[test]
fn empty_split_side_names_the_side() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, schema) = synth(&tmp.path().join("data"), &["--rows", "5000"]);
    let out = tmp.path().join("out");
    let args = [
        "ttest", "--input", s(&input), "--schema", s(&schema), "--out", s(&out), "--from", "2010-03-01", "--to",
        "2010-05-31",
    ];
    let err = run(&args).unwrap_err();
    assert_eq!(exit_code(&err), 3);
    assert!(matches!(&err, Error::EmptyGroup { side } if err.to_string().contains(side.as_str())), "{err}");
}

fn ttest_decision(dir: &Path, synth_flags: &[&str]) -> (String, f64) {
    let (input, schema) = synth(&dir.join("data"), synth_flags);
    let out = dir.join("out");
    run(&["ttest", "--input", s(&input), "--schema", s(&schema), "--out", s(&out)]).unwrap();
    let rows = read_csv(&out.join("ttest.csv"));
    (column(&rows, "decision")[0].clone(), column(&rows, "ci_low")[0].parse().unwrap())
}

#[test]
fn season_test_accepts_without_effect_and_rejects_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let flat = tmp.path().join("flat.toml");
    std::fs::write(&flat, "[trend]\nslope = 0.0\namplitude = 0.0\n").unwrap();
    let (decision, _) = ttest_decision(
        &tmp.path().join("null"),
        &["--spec", s(&flat), "--seed", "1", "--rows", "20000"],
    );
    assert_eq!(decision, "accept");
    let (decision, ci_low) =
        ttest_decision(&tmp.path().join("effect"), &["--seed", "1", "--rows", "50000", "--summer-shift", "20"]);
    assert_eq!(decision, "reject");
    assert!(ci_low > 0.0, "{ci_low}");
}

fn forecast_rows(dir: &Path, input: &Path, schema: &Path, extra: &[&str]) -> catscope::Result<Vec<Vec<String>>> {
    let mut args = vec!["forecast", "--input", s(input), "--schema", s(schema), "--out", s(dir)];
    args.extend_from_slice(extra);
    run(&args)?;
    Ok(read_csv(&dir.join("forecast.csv")))
}

fn predictions(rows: &[Vec<String>]) -> Vec<f64> {
    column(rows, "predicted").iter().map(|p| p.parse().unwrap()).collect()
}

#[test]
fn order_zero_forecasts_the_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, schema) = synth(&tmp.path().join("data"), &["--rows", "20000"]);
    let rows = forecast_rows(&tmp.path().join("out"), &input, &schema, &["--p", "0"]).unwrap();
    let pred = predictions(&rows);
    assert_eq!(pred.len(), 12);
    assert!(pred.iter().all(|p| (p - pred[0]).abs() < 1e-9 * pred[0].abs()), "{pred:?}");
}

#[test]
fn horizon_beyond_holdout_needs_recursive_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, schema) = synth(&tmp.path().join("data"), &["--rows", "20000"]);
    let long = ["--horizon", "24", "--p-max", "4"];
    let one_step = forecast_rows(&tmp.path().join("a"), &input, &schema, &long);
    assert_eq!(one_step.err().map(|e| exit_code(&e)), Some(1));

    let mut flags = long.to_vec();
    flags.extend(["--mode", "recursive"]);
    let rows = forecast_rows(&tmp.path().join("b"), &input, &schema, &flags).unwrap();
    assert_eq!(rows.len() - 1, 24);
    let actual = column(&rows, "actual");
    assert!(actual[..12].iter().all(|a| !a.is_empty()));
    assert!(actual[12..].iter().all(String::is_empty));
    assert_eq!(column(&rows, "period")[23], "2016-12");
}

#[test]
fn declining_trend_is_forecast_downward() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, schema) = synth(&tmp.path().join("data"), &["--seed", "4", "--rows", "60000"]);
    let rows =
        forecast_rows(&tmp.path().join("out"), &input, &schema, &["--mode", "recursive", "--horizon", "24"]).unwrap();
    let pred = predictions(&rows);
    let counts = catscope::tabular::aggregate_counts(
        &crate::commands::load(&crate::args::InputArgs {
            input,
            schema: Some(schema),
            from: None,
            to: None,
            strict: false,
        })
        .unwrap()
        .table,
        catscope::tabular::Granularity::Monthly,
        &catscope::DateWindow::new(
            chrono::NaiveDate::from_ymd_opt(2005, 1, 1).unwrap(),
            chrono::NaiveDate::from_ymd_opt(2006, 12, 31).unwrap(),
        )
        .unwrap(),
    )
    .unwrap()
    .as_f64();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&pred) < mean(&counts), "forecast {} vs first two years {}", mean(&pred), mean(&counts));
}

fn check_golden(produced: &Path, name: &str) {
    let path = golden_dir().join(name);
    let actual = std::fs::read_to_string(produced).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

#[test]
fn tiny_input_matches_goldens() {
    let tmp = tempfile::tempdir().unwrap();
    let input = golden_dir().join("tiny.csv");
    let schema = golden_dir().join("tiny_schema.toml");
    let out = tmp.path();
    let io = ["--input", s(&input), "--schema", s(&schema), "--out", s(out)];

    let mut mca = vec!["mca"];
    mca.extend(io);
    mca.extend(["--vars", "driver_sex,weather,vehicle_type", "--format", "csv,svg"]);
    run(&mca).unwrap();
    let mut ttest = vec!["ttest"];
    ttest.extend(io);
    ttest.extend(["--rule", "sex", "--rule", "flag:proximity_flag", "--format", "csv"]);
    run(&ttest).unwrap();

    for name in ["inertias.csv", "discrimination.csv", "categories.csv", "categories.svg", "ttest.csv"] {
        check_golden(&out.join(name), name);
    }
}
