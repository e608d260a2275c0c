//! Command-line front end: `fit`, `se`, `simulate` and `density`.
//!
//! Every command writes a document that starts with its full effective
//! configuration (including the seed actually used), so any number in the
//! output can be regenerated from the output alone.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io::{
    curves_to_csv, format_sig6, load_dataset, se_reports_to_csv, CsvOptions, CurvePoint,
    DatasetSource, DatasetSummary,
};
use crate::mixture::{
    select_model_with_table, Candidate, CovarianceFamily, DataMatrix, EmConfig, FitResult,
    FitStatus,
};
use crate::resample::{run_resampling, ReplicateMethod, ResampleConfig, DEFAULT_REPLICATES};
use crate::simulation::{
    builtin_spec, builtin_specs, coverage_table_csv, run_coverage_methods, CoverageConfig,
    CoverageResult, FittedRule, SimulationModelSpec, Structure,
};
use crate::variance::{flatten, kde_curves, ParamLayout, SeReport, SlotKind};

/// Environment variable supplying the seed when `--seed` is absent.
pub const SEED_ENV: &str = "GMMSE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "gmmse",
    version,
    about = "Gaussian mixture clustering with resampling standard errors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "snake_case", tag = "command")]
pub enum Command {
    /// Select (G, covariance family) by BIC and report the fitted model.
    Fit(FitArgs),
    /// Fit, then estimate standard errors with each requested method.
    Se(SeArgs),
    /// Coverage study on simulated data.
    Simulate(SimulateArgs),
    /// Kernel density curves of replicate estimates.
    Density(DensityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// CSV file of observations; the bundled Old Faithful data when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Field delimiter of the input CSV.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// The input CSV has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// One-based columns to use, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<usize>>,
}

impl DataArgs {
    pub fn source(&self) -> Result<DatasetSource> {
        if !self.delimiter.is_ascii() {
            return Err(Error::InvalidInput("delimiter must be ASCII".into()));
        }
        let columns = match &self.columns {
            Some(c) if c.contains(&0) => {
                return Err(Error::InvalidInput("columns are numbered from 1".into()))
            }
            Some(c) => Some(c.iter().map(|v| v - 1).collect()),
            None => None,
        };
        let csv = CsvOptions {
            has_header: !self.no_header,
            delimiter: self.delimiter as u8,
            columns,
        };
        Ok(match &self.data {
            Some(path) => DatasetSource::csv(path, csv),
            None => DatasetSource {
                csv,
                ..DatasetSource::faithful()
            },
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1)]
    pub g_min: usize,
    #[arg(long, default_value_t = 9)]
    pub g_max: usize,
    /// Covariance families to consider.
    #[arg(long, value_delimiter = ',', default_value = "EII,VII,EEE,VVV", value_parser = parse_family)]
    pub families: Vec<CovarianceFamily>,
    /// Relative convergence tolerance of EM.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
}

impl ModelArgs {
    pub fn em(&self) -> EmConfig {
        EmConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            ..EmConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ResampleArgs {
    /// Resampling methods, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "jk,bs,wlbs", value_parser = parse_method)]
    pub method: Vec<ReplicateMethod>,
    /// Bootstrap and WLBS replicate count.
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    /// Master seed; falls back to $GMMSE_SEED, then to a clock-derived value.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Run replicates on one thread.
    #[arg(long)]
    pub sequential: bool,
    /// Omit wall-clock timings so repeated runs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

impl ResampleArgs {
    fn resolve_seed(&mut self) -> u64 {
        *self.seed.get_or_insert_with(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_nanos() as u64)
        })
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub resample: ResampleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Built-in models (M1..M8), comma separated.
    #[arg(
        long = "model",
        value_delimiter = ',',
        default_value = "M1,M2,M3,M4,M5,M6,M7,M8"
    )]
    pub models: Vec<String>,
    /// JSON file with one model or an array of models; replaces --model.
    #[arg(long)]
    pub spec_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub datasets: usize,
    /// Override the per-dataset sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// `all` (every replicate must fit) or `min:<k>`.
    #[arg(long, default_value = "all", value_parser = parse_fitted_rule)]
    pub fitted_rule: FittedRule,
    /// Choose each dataset's model by BIC instead of fixing the true structure.
    #[arg(long)]
    pub select: bool,
    /// Largest G considered with --select.
    #[arg(long, default_value_t = 5)]
    pub g_max: usize,
    /// Parameter slot tabulated in CSV output.
    #[arg(long, default_value = "tau[1]")]
    pub slot: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[command(flatten)]
    pub resample: ResampleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub resample: ResampleArgs,
    /// Slots such as `mu[1][1]`, `sigma[1,2]`, `tau[2]`, or a whole kind
    /// (`tau`, `mu`, `sigma`, `all`).
    #[arg(long, value_delimiter = ',', default_value = "mu")]
    pub slots: Vec<String>,
    /// Points per curve.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_family(s: &str) -> std::result::Result<CovarianceFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<ReplicateMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_fitted_rule(s: &str) -> std::result::Result<FittedRule, String> {
    match s.trim() {
        "all" => Ok(FittedRule::AllReplicates),
        other => other
            .strip_prefix("min:")
            .and_then(|k| k.parse().ok())
            .map(FittedRule::MinReplicates)
            .ok_or_else(|| format!("expected `all` or `min:<k>`, got `{other}`")),
    }
}

/// Output envelope shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_summary: Option<DatasetSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<FitReport>,
    pub results: Vec<T>,
}

/// Selected model as reported by `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub g: usize,
    pub family: CovarianceFamily,
    pub tau: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<Vec<f64>>>,
    pub loglik: f64,
    pub bic: f64,
    pub iterations: usize,
    pub status: FitStatus,
    pub candidates: Vec<Candidate>,
}

impl FitReport {
    fn new(fit: &FitResult, candidates: Vec<Candidate>) -> Self {
        let m = fit
            .model
            .as_ref()
            .expect("selected fits are not degenerate");
        Self {
            g: m.g(),
            family: m.family,
            tau: m.weights.clone(),
            mu: m.means.clone(),
            sigma: m.covariances.iter().map(|c| c.to_rows()).collect(),
            loglik: fit.loglik,
            bic: fit.bic,
            iterations: fit.iterations,
            status: fit.status,
            candidates,
        }
    }
}

/// Per-method `se` result: a report, or the error that method hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeEntry {
    Report(SeReport),
    Failed {
        method: ReplicateMethod,
        error: String,
    },
}

pub fn cmd_fit(data: &DataMatrix, args: &ModelArgs) -> Result<(FitResult, FitReport)> {
    if args.g_min == 0 || args.g_min > args.g_max {
        return Err(Error::InvalidInput(format!(
            "invalid G range {}..={}",
            args.g_min, args.g_max
        )));
    }
    let (fit, table) =
        select_model_with_table(data, args.g_min..=args.g_max, &args.families, &args.em())?;
    let report = FitReport::new(&fit, table);
    Ok((fit, report))
}

fn check_replicates(args: &ResampleArgs) -> Result<()> {
    let needs_k = args.method.iter().any(|m| *m != ReplicateMethod::Jackknife);
    if needs_k && args.replicates < 2 {
        return Err(Error::InvalidInput(
            "--replicates must be at least 2".into(),
        ));
    }
    Ok(())
}

/// Full pipeline per method. A method that fails is reported in place and
/// does not stop the others.
pub fn cmd_se(
    data: &DataMatrix,
    model: &ModelArgs,
    resample: &ResampleArgs,
) -> Result<(FitReport, Vec<SeEntry>)> {
    check_replicates(resample)?;
    let seed = resample.seed.unwrap_or_default();
    let (fit, report) = cmd_fit(data, model)?;
    let full_model = fit.model.as_ref().expect("selected fit has a model");
    let config = ResampleConfig {
        em: model.em(),
        execution: resample.execution(),
    };
    let entries = resample
        .method
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = run_resampling(data, &fit, method, resample.replicates, seed, &config)
                .and_then(|set| SeReport::from_replicates(full_model, &set));
            match outcome {
                Ok(mut r) => {
                    if !resample.no_timing {
                        r.elapsed_seconds = Some(start.elapsed().as_secs_f64());
                    }
                    SeEntry::Report(r)
                }
                Err(e) => SeEntry::Failed {
                    method,
                    error: e.to_string(),
                },
            }
        })
        .collect();
    Ok((report, entries))
}

fn load_specs(args: &SimulateArgs) -> Result<Vec<SimulationModelSpec>> {
    let mut specs = match &args.spec_file {
        Some(path) => {
            if !path.exists() {
                return Err(Error::MissingFile(path.clone()));
            }
            parse_spec_file(&std::fs::read_to_string(path)?)?
        }
        None => args
            .models
            .iter()
            .map(|m| builtin_spec(m))
            .collect::<Result<Vec<_>>>()?,
    };
    if let Some(n) = args.n {
        specs = specs.into_iter().map(|s| s.with_n(n)).collect();
    }
    specs.iter().try_for_each(SimulationModelSpec::validate)?;
    Ok(specs)
}

/// Parses a JSON model or array of models; syntax errors carry line and column.
pub fn parse_spec_file(text: &str) -> Result<Vec<SimulationModelSpec>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(SimulationModelSpec),
        Many(Vec<SimulationModelSpec>),
    }
    let parsed: OneOrMany = serde_json::from_str(text).map_err(|e| Error::Parse {
        row: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(match parsed {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<CoverageResult>> {
    let specs = load_specs(args)?;
    let config = CoverageConfig {
        datasets: args.datasets,
        replicates: args.resample.replicates,
        seed: args.resample.seed.unwrap_or_default(),
        fitted_rule: args.fitted_rule,
        structure: if args.select {
            Structure::Selected { g_max: args.g_max }
        } else {
            Structure::True
        },
        resample: ResampleConfig {
            em: EmConfig {
                tol: args.tol,
                max_iter: args.max_iter,
                ..EmConfig::default()
            },
            execution: args.resample.execution(),
        },
    };
    let mut out = Vec::new();
    for spec in &specs {
        out.extend(run_coverage_methods(spec, &args.resample.method, &config)?);
    }
    Ok(out)
}

/// Expands kind shorthands and validates slot names against `layout`.
pub fn resolve_slots(layout: &ParamLayout, requested: &[String]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for name in requested {
        let kind = match name.trim() {
            "tau" => Some(Some(SlotKind::Tau)),
            "mu" => Some(Some(SlotKind::Mu)),
            "sigma" if layout.slot_index("sigma").is_err() => Some(Some(SlotKind::Sigma)),
            "all" => Some(None),
            _ => None,
        };
        match kind {
            Some(filter) => out.extend(
                layout
                    .slots()
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| filter.is_none_or(|k| s.kind == k))
                    .map(|(i, _)| i),
            ),
            None => out.push(layout.slot_index(name)?),
        }
    }
    Ok(out)
}

pub fn cmd_density(data: &DataMatrix, args: &DensityArgs) -> Result<Vec<CurvePoint>> {
    check_replicates(&args.resample)?;
    let (fit, _) = cmd_fit(data, &args.model)?;
    let model = fit.model.as_ref().expect("selected fit has a model");
    let estimates = flatten(model);
    let layout = estimates.layout;
    let slots = resolve_slots(&layout, &args.slots)?;
    let names = layout.names();
    let config = ResampleConfig {
        em: args.model.em(),
        execution: args.resample.execution(),
    };
    let seed = args.resample.seed.unwrap_or_default();
    let mut points: Vec<CurvePoint> = slots
        .iter()
        .map(|&s| CurvePoint {
            curve: "mle".into(),
            slot_name: names[s].clone(),
            x: estimates.values[s],
            density: None,
        })
        .collect();
    for &method in &args.resample.method {
        let set = run_resampling(data, &fit, method, args.resample.replicates, seed, &config)?;
        for &s in &slots {
            points.extend(
                kde_curves(&set, s, args.grid)?
                    .into_iter()
                    .map(|(x, d)| CurvePoint {
                        curve: method.to_string(),
                        slot_name: names[s].clone(),
                        x,
                        density: Some(d),
                    }),
            );
        }
    }
    Ok(points)
}

/// Rendered output and whether any structured error was emitted in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub text: String,
    pub partial_failure: bool,
    pub out: Option<PathBuf>,
}

fn config_value(command: &Command) -> serde_json::Value {
    serde_json::to_value(command).expect("arguments serialize")
}

fn preamble(config: &serde_json::Value, summary: Option<&DatasetSummary>) -> Vec<String> {
    let mut lines = vec![format!("config: {config}")];
    if let Some(s) = summary {
        lines.push(format!(
            "dataset: {}",
            serde_json::to_string(s).expect("summary serializes")
        ));
    }
    lines
}

fn to_json<T: Serialize>(doc: &Document<T>) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
    s.push('\n');
    s
}

/// Runs a parsed command line. Fatal errors are returned; per-method
/// failures inside `se` are rendered and flagged in [`Rendered::partial_failure`].
pub fn execute(mut command: Command) -> Result<Rendered> {
    match &mut command {
        Command::Se(a) => {
            a.resample.resolve_seed();
        }
        Command::Density(a) => {
            a.resample.resolve_seed();
        }
        Command::Simulate(a) => {
            a.resample.resolve_seed();
        }
        Command::Fit(_) => {}
    }
    let config = config_value(&command);
    match &command {
        Command::Fit(args) => {
            let source = args.data.source()?;
            let data = load_dataset(&source)?;
            let summary = DatasetSummary::new(&source, &data);
            let (fit, report) = cmd_fit(&data, &args.model)?;
            let text = match args.output.format {
                OutputFormat::Json => to_json(&Document::<FitReport> {
                    config,
                    dataset_summary: Some(summary),
                    model: None,
                    results: vec![report],
                }),
                OutputFormat::Csv => {
                    let mut lines = preamble(&config, Some(&summary));
                    lines.push(format!(
                        "model: G={} family={} loglik={} bic={}",
                        report.g, report.family, report.loglik, report.bic
                    ));
                    let est = flatten(fit.model.as_ref().expect("fitted"));
                    let mut text: String = lines.iter().map(|l| format!("# {l}\n")).collect();
                    text.push_str("slot,estimate\n");
                    for (name, v) in est.names().iter().zip(&est.values) {
                        text.push_str(&format!("\"{name}\",{}\n", format_sig6(*v)));
                    }
                    text
                }
            };
            Ok(Rendered {
                text,
                partial_failure: false,
                out: args.output.out.clone(),
            })
        }
        Command::Se(args) => {
            let source = args.data.source()?;
            let data = load_dataset(&source)?;
            let summary = DatasetSummary::new(&source, &data);
            let (report, entries) = cmd_se(&data, &args.model, &args.resample)?;
            let partial_failure = entries.iter().any(|e| matches!(e, SeEntry::Failed { .. }));
            let text = match args.output.format {
                OutputFormat::Json => to_json(&Document {
                    config,
                    dataset_summary: Some(summary),
                    model: Some(report),
                    results: entries,
                }),
                OutputFormat::Csv => {
                    let mut lines = preamble(&config, Some(&summary));
                    for e in &entries {
                        if let SeEntry::Failed { method, error } = e {
                            lines.push(format!("error: {method}: {error}"));
                        }
                    }
                    let reports: Vec<SeReport> = entries
                        .into_iter()
                        .filter_map(|e| match e {
                            SeEntry::Report(r) => Some(r),
                            SeEntry::Failed { .. } => None,
                        })
                        .collect();
                    se_reports_to_csv(&reports, &lines)
                }
            };
            Ok(Rendered {
                text,
                partial_failure,
                out: args.output.out.clone(),
            })
        }
        Command::Simulate(args) => {
            let results = cmd_simulate(args)?;
            let text = match args.output.format {
                OutputFormat::Json => to_json(&Document {
                    config,
                    dataset_summary: None,
                    model: None,
                    results,
                }),
                OutputFormat::Csv => {
                    let mut text: String = preamble(&config, None)
                        .iter()
                        .map(|l| format!("# {l}\n"))
                        .collect();
                    text.push_str(&coverage_table_csv(&results, &args.slot));
                    text
                }
            };
            Ok(Rendered {
                text,
                partial_failure: false,
                out: args.output.out.clone(),
            })
        }
        Command::Density(args) => {
            let source = args.data.source()?;
            let data = load_dataset(&source)?;
            let summary = DatasetSummary::new(&source, &data);
            let points = cmd_density(&data, args)?;
            let text = match args.output.format {
                OutputFormat::Json => to_json(&Document {
                    config,
                    dataset_summary: Some(summary),
                    model: None,
                    results: points,
                }),
                OutputFormat::Csv => curves_to_csv(&points, &preamble(&config, Some(&summary))),
            };
            Ok(Rendered {
                text,
                partial_failure: false,
                out: args.output.out.clone(),
            })
        }
    }
}

/// Names of the built-in simulation models.
pub fn builtin_model_names() -> Vec<String> {
    builtin_specs().into_keys().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "gmmse",
            "se",
            "--method",
            "bs,wlbs",
            "--replicates",
            "50",
            "--seed",
            "7",
            "--families",
            "EEE,vvv",
            "--g-max",
            "4",
        ])
        .unwrap();
        let Command::Se(a) = cli.command else {
            panic!()
        };
        assert_eq!(
            a.resample.method,
            vec![ReplicateMethod::Bootstrap, ReplicateMethod::Wlbs]
        );
        assert_eq!(a.resample.seed, Some(7));
        assert_eq!(
            a.model.families,
            vec![CovarianceFamily::FullEqual, CovarianceFamily::FullVarying]
        );
        assert_eq!(a.model.g_max, 4);
    }

    #[test]
    fn fitted_rule_values() {
        assert_eq!(parse_fitted_rule("all"), Ok(FittedRule::AllReplicates));
        assert_eq!(parse_fitted_rule("min:5"), Ok(FittedRule::MinReplicates(5)));
        assert!(parse_fitted_rule("some").is_err());
    }

    #[test]
    fn slot_shorthands() {
        let layout = ParamLayout::new(3, 2, CovarianceFamily::FullEqual);
        assert_eq!(
            resolve_slots(&layout, &["mu".into()]).unwrap(),
            (3..9).collect::<Vec<_>>()
        );
        assert_eq!(
            resolve_slots(&layout, &["sigma".into()]).unwrap(),
            vec![9, 10, 11]
        );
        assert_eq!(resolve_slots(&layout, &["all".into()]).unwrap().len(), 12);
        assert!(matches!(
            resolve_slots(&layout, &["mu[4][1]".into()]),
            Err(Error::UnknownSlot(_))
        ));
    }

    #[test]
    fn spec_file_error_location() {
        match parse_spec_file("{\n  \"name\": \"X\",\n  oops\n}") {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
