//! Dataset loading and flat-file serialization of reports and curves.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{CovarianceFamily, DataMatrix};
use crate::resample::ReplicateMethod;
use crate::simulation::{sample_dataset, SimulationModelSpec};
use crate::variance::{ParamLayout, ParamVector, SeReport};

const FAITHFUL_CSV: &str = include_str!("../data/faithful.csv");

/// Old Faithful eruptions: 272 rows of (eruption minutes, waiting minutes).
pub fn faithful() -> DataMatrix {
    parse_csv(FAITHFUL_CSV, &CsvOptions::default()).expect("bundled data parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Origin {
    BundledFaithful,
    CsvPath {
        path: PathBuf,
    },
    SimSpec {
        spec: SimulationModelSpec,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
    /// Zero-based columns to keep; all columns when `None`.
    pub columns: Option<Vec<usize>>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            delimiter: b',',
            columns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub origin: Origin,
    pub csv: CsvOptions,
}

impl DatasetSource {
    pub fn faithful() -> Self {
        Self {
            origin: Origin::BundledFaithful,
            csv: CsvOptions::default(),
        }
    }

    pub fn csv(path: impl Into<PathBuf>, csv: CsvOptions) -> Self {
        Self {
            origin: Origin::CsvPath { path: path.into() },
            csv,
        }
    }
}

/// Shape and provenance of the data a run used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub n: usize,
    pub p: usize,
    pub column_means: Vec<f64>,
}

impl DatasetSummary {
    pub fn new(source: &DatasetSource, data: &DataMatrix) -> Self {
        let source = match &source.origin {
            Origin::BundledFaithful => "faithful".to_string(),
            Origin::CsvPath { path } => path.display().to_string(),
            Origin::SimSpec { spec, seed } => format!("{} (seed {seed})", spec.name),
        };
        Self {
            source,
            n: data.n(),
            p: data.p(),
            column_means: data.column_means(),
        }
    }
}

pub fn load_dataset(source: &DatasetSource) -> Result<DataMatrix> {
    let data = match &source.origin {
        Origin::BundledFaithful => parse_csv(FAITHFUL_CSV, &CsvOptions::default())?,
        Origin::CsvPath { path } => read_csv(path, &source.csv)?,
        Origin::SimSpec { spec, seed } => {
            spec.validate()?;
            sample_dataset(spec, *seed)
        }
    };
    match (&source.origin, &source.csv.columns) {
        (Origin::CsvPath { .. }, _) | (_, None) => Ok(data),
        (_, Some(cols)) => data.select_columns(cols),
    }
}

pub fn read_csv(path: &Path, options: &CsvOptions) -> Result<DataMatrix> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_csv(&std::fs::read_to_string(path)?, options)
}

/// Parses numeric CSV. Error locations are one-based: `row` counts data rows
/// after any header, `column` counts fields in the file.
pub fn parse_csv(text: &str, options: &CsvOptions) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut n = 0;
    let mut p = None;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: r + 1,
            column: 1,
            message: e.to_string(),
        })?;
        let columns: Vec<usize> = match &options.columns {
            Some(c) => c.clone(),
            None => (0..record.len()).collect(),
        };
        for &c in &columns {
            let cell = record.get(c).ok_or_else(|| Error::Parse {
                row: r + 1,
                column: c + 1,
                message: "missing field".into(),
            })?;
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: c + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    column: c + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            values.push(v);
        }
        p.get_or_insert(columns.len());
        n += 1;
    }
    let p = match p {
        Some(p) if n > 0 && p > 0 => p,
        _ => {
            return Err(Error::Parse {
                row: 1,
                column: 1,
                message: "no data rows".into(),
            })
        }
    };
    DataMatrix::new(values, n, p)
}

/// Rounds to six significant digits and prints the shortest representation
/// of the rounded value, so re-formatting a parsed value is the identity.
pub fn format_sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn parse_f64(cell: &str, row: usize, column: usize) -> Result<f64> {
    cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("`{cell}` is not a number"),
    })
}

const REPORT_COLUMNS: [&str; 14] = [
    "method",
    "family",
    "g",
    "p",
    "slot",
    "estimate",
    "std_error",
    "ci_lower",
    "ci_upper",
    "replicate_mean",
    "k_fitted",
    "k_total",
    "relabelled",
    "elapsed_seconds",
];

/// One row per parameter slot per report, numbers at six significant
/// digits. `preamble` lines are written first as `#` comments.
pub fn se_reports_to_csv(reports: &[SeReport], preamble: &[String]) -> String {
    let mut out = String::new();
    preamble
        .iter()
        .for_each(|l| out.push_str(&format!("# {l}\n")));
    out.push_str(&REPORT_COLUMNS.join(","));
    out.push('\n');
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(vec![]);
    for r in reports {
        let layout = r.estimates.layout;
        for (i, name) in layout.names().iter().enumerate() {
            let row = [
                r.method.to_string(),
                layout.family.to_string(),
                layout.g.to_string(),
                layout.p.to_string(),
                name.clone(),
                format_sig6(r.estimates.values[i]),
                format_sig6(r.std_errors[i]),
                format_sig6(r.ci_lower[i]),
                format_sig6(r.ci_upper[i]),
                format_sig6(r.replicate_mean[i]),
                r.k_fitted.to_string(),
                r.k_total.to_string(),
                r.relabelled.to_string(),
                r.elapsed_seconds.map(format_sig6).unwrap_or_default(),
            ];
            w.write_record(&row).expect("writing to memory");
        }
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8"));
    out
}

/// Inverse of [`se_reports_to_csv`] up to its six-digit rounding.
pub fn se_reports_from_csv(text: &str) -> Result<Vec<SeReport>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut reports: Vec<SeReport> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let rec = record?;
        let get = |c: usize| rec.get(c).unwrap_or_default();
        let int = |c: usize| -> Result<usize> {
            get(c).parse().map_err(|_| Error::Parse {
                row,
                column: c + 1,
                message: format!("`{}` is not a count", get(c)),
            })
        };
        let method: ReplicateMethod = get(0).parse()?;
        let family: CovarianceFamily = get(1).parse()?;
        let layout = ParamLayout::new(int(2)?, int(3)?, family);
        let start_new = match reports.last() {
            Some(last) => last.method != method || last.estimates.values.len() == layout.len(),
            None => true,
        };
        if start_new {
            reports.push(SeReport {
                method,
                estimates: ParamVector {
                    layout,
                    values: Vec::new(),
                },
                std_errors: Vec::new(),
                replicate_mean: Vec::new(),
                ci_lower: Vec::new(),
                ci_upper: Vec::new(),
                k_fitted: int(10)?,
                k_total: int(11)?,
                relabelled: int(12)?,
                elapsed_seconds: match get(13) {
                    "" => None,
                    s => Some(parse_f64(s, row, 14)?),
                },
            });
        }
        let report = reports.last_mut().expect("a report was just pushed");
        let slot = report.estimates.values.len();
        if layout.names().get(slot).map(String::as_str) != Some(get(4)) {
            return Err(Error::Parse {
                row,
                column: 5,
                message: format!("unexpected slot `{}`", get(4)),
            });
        }
        report.estimates.values.push(parse_f64(get(5), row, 6)?);
        report.std_errors.push(parse_f64(get(6), row, 7)?);
        report.ci_lower.push(parse_f64(get(7), row, 8)?);
        report.ci_upper.push(parse_f64(get(8), row, 9)?);
        report.replicate_mean.push(parse_f64(get(9), row, 10)?);
    }
    if let Some(r) = reports
        .iter()
        .find(|r| r.estimates.values.len() != r.estimates.layout.len())
    {
        return Err(Error::Parse {
            row: 0,
            column: 5,
            message: format!("incomplete {} report", r.method),
        });
    }
    Ok(reports)
}

/// A density curve for one slot, or (with `density = None`) the marker for
/// the full-data estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub curve: String,
    pub slot_name: String,
    pub x: f64,
    pub density: Option<f64>,
}

pub fn curves_to_csv(points: &[CurvePoint], preamble: &[String]) -> String {
    let mut out = String::new();
    preamble
        .iter()
        .for_each(|l| out.push_str(&format!("# {l}\n")));
    out.push_str("curve,slot_name,x,density\n");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(vec![]);
    for p in points {
        w.write_record([
            p.curve.clone(),
            p.slot_name.clone(),
            format_sig6(p.x),
            p.density.map(format_sig6).unwrap_or_default(),
        ])
        .expect("writing to memory");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8"));
    out
}

pub fn curves_from_csv(text: &str) -> Result<Vec<CurvePoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader
        .records()
        .enumerate()
        .map(|(r, rec)| {
            let rec = rec?;
            let get = |c: usize| rec.get(c).unwrap_or_default();
            Ok(CurvePoint {
                curve: get(0).to_string(),
                slot_name: get(1).to_string(),
                x: parse_f64(get(2), r + 1, 3)?,
                density: match get(3) {
                    "" => None,
                    s => Some(parse_f64(s, r + 1, 4)?),
                },
            })
        })
        .collect()
}
