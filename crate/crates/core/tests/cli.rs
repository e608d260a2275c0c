use std::io::Write;
use std::process::{Command, Output};

use clap::Parser;
use gmmse::cli::{self, Cli, Document, FitReport, SeEntry};
use gmmse::io::{curves_from_csv, curves_to_csv, se_reports_from_csv, se_reports_to_csv};
use gmmse::resample::ReplicateMethod;
use gmmse::simulation::CoverageResult;
use gmmse::variance::{trapezoid, SeReport};

fn gmmse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmmse"))
        .args(args)
        .env_remove(cli::SEED_ENV)
        .output()
        .unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = gmmse(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn preamble(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .map(str::to_string)
        .collect()
}

fn reports(doc: &Document<SeEntry>) -> Vec<&SeReport> {
    doc.results
        .iter()
        .map(|e| match e {
            SeEntry::Report(r) => r,
            SeEntry::Failed { method, error } => panic!("{method} failed: {error}"),
        })
        .collect()
}

#[test]
fn fit_reports_the_faithful_model() {
    let doc: Document<FitReport> = serde_json::from_str(&stdout(&["fit", "--g-max", "5"])).unwrap();
    let fit = &doc.results[0];
    assert_eq!((fit.g, fit.family.code()), (3, "EEE"));
    assert_eq!(doc.dataset_summary.as_ref().unwrap().n, 272);
    assert_eq!(doc.config["model"]["g_max"], 5);
}

#[test]
fn se_json_round_trips_and_echoes_the_seed() {
    let args = ["se", "--seed", "5", "--replicates", "30", "--no-timing"];
    let text = stdout(&args);
    let doc: Document<SeEntry> = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.config["resample"]["seed"], 5);
    let mut again = serde_json::to_string_pretty(&doc).unwrap();
    again.push('\n');
    assert_eq!(again, text);
    // same numbers as the in-process pipeline
    let Ok(cli::Command::Se(parsed)) =
        Cli::try_parse_from(std::iter::once("gmmse").chain(args)).map(|c| c.command)
    else {
        panic!()
    };
    let data = gmmse::io::faithful();
    let (_, entries) = cli::cmd_se(&data, &parsed.model, &parsed.resample).unwrap();
    assert_eq!(doc.results, entries);
}

#[test]
fn seed_from_environment_matches_flag() {
    let flag = stdout(&[
        "se",
        "--method",
        "wlbs",
        "--seed",
        "21",
        "--replicates",
        "20",
        "--no-timing",
    ]);
    let env = Command::new(env!("CARGO_BIN_EXE_gmmse"))
        .args([
            "se",
            "--method",
            "wlbs",
            "--replicates",
            "20",
            "--no-timing",
        ])
        .env(cli::SEED_ENV, "21")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(env.stdout).unwrap(), flag);
}

#[test]
fn unseeded_runs_record_the_seed_they_used() {
    let text = stdout(&["se", "--method", "bs", "--replicates", "10", "--no-timing"]);
    let doc: Document<SeEntry> = serde_json::from_str(&text).unwrap();
    let seed = doc.config["resample"]["seed"].as_u64().unwrap().to_string();
    let rerun = stdout(&[
        "se",
        "--method",
        "bs",
        "--replicates",
        "10",
        "--no-timing",
        "--seed",
        &seed,
    ]);
    assert_eq!(rerun, text);
}

#[test]
fn se_csv_parses_back_to_the_same_text() {
    let text = stdout(&[
        "se",
        "--seed",
        "8",
        "--replicates",
        "25",
        "--format",
        "csv",
        "--no-timing",
    ]);
    let parsed = se_reports_from_csv(&text).unwrap();
    assert_eq!(parsed.len(), 3);
    assert_eq!(se_reports_to_csv(&parsed, &preamble(&text)), text);
}

#[test]
fn jackknife_covariance_errors_match_published_scale() {
    let doc: Document<SeEntry> = serde_json::from_str(&stdout(&[
        "se",
        "--method",
        "jk",
        "--no-timing",
        "--seed",
        "0",
    ]))
    .unwrap();
    let report = reports(&doc)[0];
    let se = |name: &str| report.std_errors[report.estimates.layout.slot_index(name).unwrap()];
    for (name, published) in [
        ("sigma[1,1]", 0.01),
        ("sigma[1,2]", 0.12),
        ("sigma[2,2]", 2.77),
    ] {
        assert!(
            (se(name) / published - 1.0).abs() <= 0.5,
            "{name}: {}",
            se(name)
        );
    }
}

#[test]
fn two_replicates_is_enough_for_a_report() {
    let doc: Document<SeEntry> = serde_json::from_str(&stdout(&[
        "se",
        "--method",
        "bs",
        "--replicates",
        "2",
        "--seed",
        "1",
    ]))
    .unwrap();
    assert_eq!(reports(&doc)[0].k_total, 2);
}

#[test]
fn density_curves_for_the_means() {
    let args = [
        "density",
        "--method",
        "bs,wlbs",
        "--slots",
        "mu",
        "--replicates",
        "60",
        "--seed",
        "3",
        "--format",
        "csv",
    ];
    let text = stdout(&args);
    let points = curves_from_csv(&text).unwrap();
    assert_eq!(curves_to_csv(&points, &preamble(&text)), text);

    let mut curves: Vec<(String, String)> = points
        .iter()
        .filter(|p| p.density.is_some())
        .map(|p| (p.curve.clone(), p.slot_name.clone()))
        .collect();
    curves.dedup();
    assert_eq!(curves.len(), 12);
    for (curve, slot) in &curves {
        let xy: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| &p.curve == curve && &p.slot_name == slot)
            .map(|p| (p.x, p.density.unwrap()))
            .collect();
        assert_eq!(xy.len(), 512);
        // six significant digits in the file
        assert!((trapezoid(&xy) - 1.0).abs() < 2e-3, "{curve} {slot}");
    }

    let fit: Document<FitReport> = serde_json::from_str(&stdout(&["fit"])).unwrap();
    let fit = &fit.results[0];
    for p in points.iter().filter(|p| p.curve == "mle") {
        let (k, j) = match p.slot_name.as_str() {
            s if s.starts_with("mu[") => {
                let idx: Vec<usize> = s[3..s.len() - 1]
                    .split("][")
                    .map(|v| v.parse().unwrap())
                    .collect();
                (idx[0] - 1, idx[1] - 1)
            }
            other => panic!("unexpected slot {other}"),
        };
        assert!((p.x - fit.mu[k][j]).abs() <= 5e-6 * fit.mu[k][j].abs());
    }
}

#[test]
fn simulate_with_no_datasets_succeeds() {
    let doc: Document<CoverageResult> = serde_json::from_str(&stdout(&[
        "simulate",
        "--model",
        "M1",
        "--datasets",
        "0",
        "--seed",
        "1",
    ]))
    .unwrap();
    assert_eq!(doc.results.len(), 3);
    assert!(doc
        .results
        .iter()
        .all(|r| r.datasets_fitted == 0 && r.datasets_total == 0));
}

#[test]
fn simulate_reads_a_spec_file() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    let spec = r#"{"name": "pair", "tau_true": [0.5, 0.5], "mu_true": [[0, 0], [4, 4]],
        "sigma_true": [[[1, 0], [0, 1]], [[1, 0.2], [0.2, 1]]], "n": 80}"#;
    file.write_all(spec.as_bytes()).unwrap();
    let path = file.path().to_str().unwrap();
    let doc: Document<CoverageResult> = serde_json::from_str(&stdout(&[
        "simulate",
        "--spec-file",
        path,
        "--datasets",
        "3",
        "--replicates",
        "10",
        "--method",
        "bs",
        "--seed",
        "2",
    ]))
    .unwrap();
    assert_eq!(
        (doc.results[0].model.as_str(), doc.results[0].method),
        ("pair", ReplicateMethod::Bootstrap)
    );
}

#[test]
fn malformed_spec_file_reports_its_location() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(b"{\n  \"name\": \"x\",\n  \"tau_true\": [0.5 0.5]\n}")
        .unwrap();
    let out = gmmse(&[
        "simulate",
        "--spec-file",
        file.path().to_str().unwrap(),
        "--datasets",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("row 3"), "{err}");
}

#[test]
fn csv_input_options_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    let mut text = String::new();
    for row in gmmse::io::faithful().rows() {
        text.push_str(&format!("x;{};{}\n", row[0], row[1]));
    }
    std::fs::write(&input, text).unwrap();
    let out = dir.path().join("fit.json");
    let status = gmmse(&[
        "fit",
        "--data",
        input.to_str().unwrap(),
        "--no-header",
        "--delimiter",
        ";",
        "--columns",
        "2,3",
        "--g-max",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let doc: Document<FitReport> =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!((doc.results[0].g, doc.results[0].family.code()), (3, "EEE"));
}

#[test]
fn missing_and_malformed_inputs_fail_cleanly() {
    let out = gmmse(&["fit", "--data", "/nonexistent/data.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/data.csv"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n3,4\n5,6\n7,8\n9,oops\n").unwrap();
    let out = gmmse(&["fit", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("row 5") && err.contains("column 2"), "{err}");

    let out = gmmse(&[
        "density",
        "--slots",
        "mu[9][1]",
        "--seed",
        "1",
        "--replicates",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn constant_data_has_no_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    std::fs::write(&path, "x\n".to_string() + &"1.5\n".repeat(20)).unwrap();
    let out = gmmse(&["fit", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
