use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

use qdivide::cli::{self, ClassifyResult, Example1Row, Report};
use qdivide::bfi::WitnessReport;
use qdivide::mixtures::{DiagramGrid, RegionLabel};

fn qdivide(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdivide")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = qdivide(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(name)
}

#[test]
fn classify_examples() {
    let r = json(&["classify", "--mixture", "0.5,0.5,0"]);
    assert_eq!(r["result"]["cp"], false);
    assert_eq!(r["result"]["p"], true);
    assert_eq!(r["result"]["models"][0]["cp_divisible"]["label"], "P_DIVISIBLE_ONLY");
    assert_eq!(r["version"], qdivide::VERSION);
    assert_eq!(r["config"]["command"], "classify");

    let r = json(&["classify", "--mixture", "0.5,0.5,0", "--tensor-with", "self"]);
    assert_eq!(r["result"]["tensor_p"], false);
    assert_eq!(r["result"]["tensor"]["label"], "NOT_P_DIVISIBLE");

    let r = json(&["classify", "--rates", "1,1,1"]);
    assert_eq!(r["result"]["cp"], true);
}

#[test]
fn classify_report_round_trips() {
    let text = stdout(&["classify", "--rates-pair", "1,1,sin(t)", "1,1,-sin(t)", "--coupling", "2"]);
    let report: Report<ClassifyResult> = serde_json::from_str(&text).unwrap();
    assert_eq!(report.result.tensor_p, Some(true));
    assert!(!report.result.cp);
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
}

#[test]
fn tabulated_input() {
    let path = scratch("tabulated_rates.csv");
    let mut text = String::from("t,gamma1,gamma2,gamma3\n");
    for i in 0..=40 {
        let t = i as f64 * 0.5;
        text.push_str(&format!("{t},1,0.5,{}\n", -0.2 * (t / 4.0).sin()));
    }
    std::fs::write(&path, text).unwrap();
    let r = json(&["classify", "--tabulated", path.to_str().unwrap()]);
    assert_eq!(r["result"]["cp"], false);
    assert_eq!(r["result"]["p"], true);
}

#[test]
fn diagram_fig1_rows_and_round_trip() {
    let text = stdout(&["diagram", "--mode", "fig1", "--resolution", "256"]);
    let cells = cli::parse_diagram_csv(&text).unwrap();
    // Cell centers inside the closed simplex.
    assert_eq!(cells.len(), 256 * 257 / 2);
    let third = cells
        .iter()
        .find(|c| (c.coord1 - 85.5 / 256.0).abs() < 1e-12 && (c.coord2 - 85.5 / 256.0).abs() < 1e-12)
        .unwrap();
    assert_eq!(third.label, RegionLabel::Cp);
    let again: Vec<String> = cells
        .iter()
        .map(|c| format!("{},{},{},{}", cli::fmt_f64(c.coord1), cli::fmt_f64(c.coord2), c.label, cli::fmt_f64(c.margin)))
        .collect();
    assert_eq!(text.lines().skip(1).collect::<Vec<_>>(), again);
}

#[test]
fn diagram_fig2_and_fig3() {
    let cells = cli::parse_diagram_csv(&stdout(&["diagram", "--mode", "fig2", "--resolution", "64"])).unwrap();
    assert_eq!(cells.len(), 64 * 64);
    for c in &cells {
        let (inside, _) = qdivide::mixtures::bisector_tensor_test(c.coord1, c.coord2).unwrap();
        match c.label {
            RegionLabel::P2Tensor => assert!(inside),
            RegionLabel::N2 => assert!(!inside),
            _ => {}
        }
    }
    assert!(cells.iter().any(|c| c.label == RegionLabel::P2Tensor));

    let text = stdout(&["diagram", "--mode", "fig3", "--p", "0.4,0.4,0.2", "--t", "inf", "--resolution", "64"]);
    let cells = cli::parse_diagram_csv(&text).unwrap();
    assert!(cells.iter().any(|c| c.label == RegionLabel::P2Tensor));
    assert!(cells.iter().any(|c| c.label == RegionLabel::N2));

    let report: Report<DiagramGrid> =
        serde_json::from_str(&stdout(&["diagram", "--mode", "fig3", "--resolution", "64", "--format", "json"])).unwrap();
    assert_eq!(report.result.cells, cells);
}

#[test]
fn diagram_output_file_and_gnuplot() {
    let path = scratch("fig1.dat");
    stdout(&["diagram", "--mode", "fig1", "--resolution", "16", "--format", "gnuplot-dat", "-o", path.to_str().unwrap()]);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# qdivide"));
    assert!(text.contains("# label CP\n") && text.contains("# label P_ONLY\n"));
    assert!(text.contains("\n\n\n# label"));
}

#[test]
fn example1_table() {
    let text = stdout(&["example1"]);
    let rows = cli::parse_example1_csv(&text).unwrap();
    assert_eq!(rows.len(), 16);
    let get = |l: f64, w: f64| -> &Example1Row { rows.iter().find(|r| r.lambda == l && r.omega == w).unwrap() };
    assert!(get(0.5, 1.0).is_cp_for_all_t);
    assert!(!get(0.5, -1.0).is_cp_for_all_t);
    assert!(get(2.0, -1.0).is_cp_for_all_t);
    let json_rows: Report<Vec<Example1Row>> = serde_json::from_str(&stdout(&["example1", "--format", "json"])).unwrap();
    assert_eq!(json_rows.result, rows);
}

#[test]
fn exit_codes() {
    for args in [
        &["classify", "--mixture", "0.5,0.5"][..],
        &["classify", "--mixture", "0.6,0.6,0"],
        &["classify", "--rates", "1,1,cos(t)"],
        &["diagram", "--mode", "fig9"],
        &["diagram", "--mode", "fig3", "--p", "0.3,0.3,0.4"],
        &["witness", "--mixture", "0.5,0.5,0", "--budget", "10"],
        &["witness", "--rates", "400,400,400", "--budget", "10", "--seed", "1"],
        &["classify", "--rates", "1,1,1", "--format", "csv"],
        &["bogus"],
    ] {
        let out = qdivide(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = Command::new(env!("CARGO_BIN_EXE_qdivide"))
        .args(["classify", "--rates", "1,1,1"])
        .env(cli::THREADS_ENV, "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_qdivide"))
        .args(["classify", "--rates", "1,1,1"])
        .env(cli::THREADS_ENV, "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn outputs_are_bit_identical() {
    let args = ["witness", "--mixture", "0.5,0.5,0", "--budget", "40", "--seed", "3", "--t-max", "4", "--points", "200"];
    assert_eq!(stdout(&args), stdout(&args));
    let args = ["diagram", "--mode", "fig1", "--resolution", "64"];
    assert_eq!(stdout(&args), stdout(&args));
}

fn witness(args: &[&str]) -> WitnessReport {
    let r: Report<WitnessReport> = serde_json::from_str(&stdout(args)).unwrap();
    r.result
}

#[test]
fn witness_examples() {
    let r = witness(&["witness", "--mixture", "0.45,0.45,0.10", "--budget", "2000", "--seed", "7"]);
    assert!(r.found && r.max_derivative > qdivide::bfi::DETECTION_THRESHOLD);
    let r = witness(&["witness", "--mixture", "0.333333,0.333333,0.333334", "--budget", "2000", "--seed", "7"]);
    assert!(!r.found, "{r:?}");
    let r = witness(&["witness", "--rates-pair", "1,1,sin(t)", "1,1,-sin(t)", "--budget", "2000", "--seed", "7"]);
    assert!(!r.found, "{r:?}");
}
