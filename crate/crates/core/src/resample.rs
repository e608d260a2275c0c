//! Jackknife, bootstrap and weighted likelihood bootstrap replicates.
//!
//! Every replicate refits the full-data structure (G and covariance family)
//! starting from the full-data responsibilities of the observations it
//! contains, so replicate components inherit the full-fit labels. A nearest-mean
//! permutation check runs afterwards and records any relabelling it applies.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, mix_seed, Execution};
use crate::linalg::{Cholesky, Matrix};
use crate::mixture::{
    em_fit, DataMatrix, EmConfig, FitResult, MixtureModel, ResponsibilityMatrix, WeightVector,
};
use crate::variance::{flatten, ParamLayout};

/// Default number of bootstrap and WLBS replicates.
pub const DEFAULT_REPLICATES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReplicateMethod {
    #[serde(rename = "jk")]
    Jackknife,
    #[serde(rename = "bs")]
    Bootstrap,
    #[serde(rename = "wlbs")]
    Wlbs,
}

impl ReplicateMethod {
    pub const ALL: [ReplicateMethod; 3] = [
        ReplicateMethod::Jackknife,
        ReplicateMethod::Bootstrap,
        ReplicateMethod::Wlbs,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ReplicateMethod::Jackknife => "jk",
            ReplicateMethod::Bootstrap => "bs",
            ReplicateMethod::Wlbs => "wlbs",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            ReplicateMethod::Jackknife => 0,
            ReplicateMethod::Bootstrap => 1,
            ReplicateMethod::Wlbs => 2,
        }
    }
}

impl fmt::Display for ReplicateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ReplicateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jk" | "jackknife" => Ok(ReplicateMethod::Jackknife),
            "bs" | "bootstrap" => Ok(ReplicateMethod::Bootstrap),
            "wlbs" => Ok(ReplicateMethod::Wlbs),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

/// Which rows of the original data a replicate uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSelection {
    /// All rows except this one.
    Omit(usize),
    /// Rows drawn with replacement, in draw order.
    Resample(Vec<usize>),
    /// Every row, once.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSpec {
    pub method: ReplicateMethod,
    pub index: usize,
    pub selection: RowSelection,
    /// Observation weights; `None` means unit weights.
    pub weights: Option<WeightVector>,
}

impl ReplicateSpec {
    pub fn weights(&self, n: usize) -> WeightVector {
        self.weights
            .clone()
            .unwrap_or_else(|| WeightVector::ones(n))
    }

    /// WLBS replicate with every weight set to one.
    pub fn unit_wlbs(n: usize, index: usize) -> Self {
        Self {
            method: ReplicateMethod::Wlbs,
            index,
            selection: RowSelection::All,
            weights: Some(WeightVector::ones(n)),
        }
    }
}

/// Generator for replicate `k` of `method`: ChaCha8 keyed by the master seed
/// and method, on stream `k`.
fn replicate_rng(seed: u64, method: ReplicateMethod, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, method.stream_tag()));
    rng.set_stream(k as u64);
    rng
}

pub fn jackknife_replicates(n: usize) -> Vec<ReplicateSpec> {
    (0..n)
        .map(|j| ReplicateSpec {
            method: ReplicateMethod::Jackknife,
            index: j,
            selection: RowSelection::Omit(j),
            weights: None,
        })
        .collect()
}

pub fn bootstrap_replicate(n: usize, k: usize, seed: u64) -> ReplicateSpec {
    let mut rng = replicate_rng(seed, ReplicateMethod::Bootstrap, k);
    ReplicateSpec {
        method: ReplicateMethod::Bootstrap,
        index: k,
        selection: RowSelection::Resample((0..n).map(|_| rng.random_range(0..n)).collect()),
        weights: None,
    }
}

pub fn bootstrap_replicates(n: usize, k: usize, seed: u64) -> Vec<ReplicateSpec> {
    (0..k).map(|i| bootstrap_replicate(n, i, seed)).collect()
}

/// Standard exponential draws rescaled to mean one: `n` times a uniform
/// Dirichlet vector.
pub fn wlbs_replicate(n: usize, k: usize, seed: u64) -> ReplicateSpec {
    let mut rng = replicate_rng(seed, ReplicateMethod::Wlbs, k);
    let draws: Vec<f64> = (0..n).map(|_| rng.sample(Exp1)).collect();
    let weights = WeightVector::normalized(draws).expect("exponential draws have positive sum");
    ReplicateSpec {
        method: ReplicateMethod::Wlbs,
        index: k,
        selection: RowSelection::All,
        weights: Some(weights),
    }
}

pub fn wlbs_replicates(n: usize, k: usize, seed: u64) -> Vec<ReplicateSpec> {
    (0..k).map(|i| wlbs_replicate(n, i, seed)).collect()
}

pub fn replicate_specs(
    method: ReplicateMethod,
    n: usize,
    k: usize,
    seed: u64,
) -> Vec<ReplicateSpec> {
    match method {
        ReplicateMethod::Jackknife => jackknife_replicates(n),
        ReplicateMethod::Bootstrap => bootstrap_replicates(n, k, seed),
        ReplicateMethod::Wlbs => wlbs_replicates(n, k, seed),
    }
}

/// Full-data responsibilities restricted to the replicate's rows.
pub fn replicate_init(
    full_resp: &ResponsibilityMatrix,
    spec: &ReplicateSpec,
) -> ResponsibilityMatrix {
    match &spec.selection {
        RowSelection::Omit(j) => full_resp.without_row(*j),
        RowSelection::Resample(idx) => full_resp.gather(idx),
        RowSelection::All => full_resp.clone(),
    }
}

/// Rows the replicate is fitted on: the sample minus one row, a resample, or all of it.
pub fn replicate_data<'a>(data: &'a DataMatrix, spec: &ReplicateSpec) -> Cow<'a, DataMatrix> {
    match &spec.selection {
        RowSelection::Omit(j) => Cow::Owned(data.without_row(*j)),
        RowSelection::Resample(idx) => Cow::Owned(data.gather(idx)),
        RowSelection::All => Cow::Borrowed(data),
    }
}

/// Permutation `perm` minimizing `Σ_k d(μ_rep[perm[k]], μ_ref[k])`, by
/// exhaustive search (component counts here are small).
///
/// `d` is the Mahalanobis distance under `metric` when given, otherwise
/// Euclidean. Without a metric the largest-scale coordinate dominates, which
/// on data like Old Faithful (minutes vs. tens of minutes) reorders
/// components whose identity never changed.
pub fn best_permutation(
    reference: &[Vec<f64>],
    candidate: &[Vec<f64>],
    metric: Option<&Matrix>,
) -> Vec<usize> {
    let g = reference.len();
    let chol = metric.and_then(|m| Cholesky::new(m, 0.0));
    let mut scratch = vec![0.0; reference.first().map_or(0, Vec::len)];
    let cost: Vec<Vec<f64>> = reference
        .iter()
        .map(|r| {
            candidate
                .iter()
                .map(|c| match &chol {
                    Some(ch) => ch.mahalanobis_sq(c, r, &mut scratch).sqrt(),
                    None => r
                        .iter()
                        .zip(c)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt(),
                })
                .collect()
        })
        .collect();
    let mut best = (f64::INFINITY, (0..g).collect::<Vec<_>>());
    let mut perm: Vec<usize> = (0..g).collect();
    let mut used = vec![false; g];
    fn search(
        depth: usize,
        acc: f64,
        cost: &[Vec<f64>],
        perm: &mut Vec<usize>,
        used: &mut [bool],
        best: &mut (f64, Vec<usize>),
    ) {
        if acc >= best.0 {
            return;
        }
        if depth == cost.len() {
            *best = (acc, perm.clone());
            return;
        }
        for c in 0..cost.len() {
            if !used[c] {
                used[c] = true;
                perm[depth] = c;
                search(depth + 1, acc + cost[depth][c], cost, perm, used, best);
                used[c] = false;
            }
        }
    }
    search(0, 0.0, &cost, &mut perm, &mut used, &mut best);
    best.1
}

/// Outcome of refitting one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    /// Flattened parameters, `None` when the replicate could not be fitted.
    pub params: Option<Vec<f64>>,
    pub relabelled: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub em: EmConfig,
    pub execution: Execution,
}

fn full_parts(full_fit: &FitResult) -> Result<(&MixtureModel, &ResponsibilityMatrix)> {
    match (&full_fit.model, &full_fit.responsibilities) {
        (Some(m), Some(z)) => Ok((m, z)),
        _ => Err(Error::InvalidInput("full-data fit is degenerate".into())),
    }
}

/// Refits the full model's structure to one replicate.
pub fn fit_replicate(
    data: &DataMatrix,
    full_fit: &FitResult,
    spec: &ReplicateSpec,
    config: &ResampleConfig,
) -> Result<ReplicateOutcome> {
    let (full_model, full_resp) = full_parts(full_fit)?;
    let view = replicate_data(data, spec);
    let init = replicate_init(full_resp, spec);
    let weights = spec.weights(view.n());
    let fit = em_fit(&view, &init, full_model.family, &weights, &config.em)?;
    let model = match fit.model {
        Some(m) if fit.loglik.is_finite() => m,
        _ => {
            return Ok(ReplicateOutcome {
                params: None,
                relabelled: false,
                iterations: fit.iterations,
            })
        }
    };
    let perm = best_permutation(
        &full_model.means,
        &model.means,
        Some(&full_model.pooled_covariance()),
    );
    let relabelled = perm.iter().enumerate().any(|(k, &c)| k != c);
    let model = if relabelled {
        model.permuted(&perm)
    } else {
        model
    };
    Ok(ReplicateOutcome {
        params: Some(flatten(&model).values),
        relabelled,
        iterations: fit.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateStatus {
    Fitted,
    NotFitted,
}

/// Replicate parameter vectors in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub method: ReplicateMethod,
    pub layout: ParamLayout,
    /// Size of the original sample.
    pub n: usize,
    rows: Vec<Option<Vec<f64>>>,
    pub relabelled: usize,
}

impl ReplicateSet {
    pub fn from_rows(
        method: ReplicateMethod,
        layout: ParamLayout,
        n: usize,
        rows: Vec<Option<Vec<f64>>>,
    ) -> Self {
        assert!(
            rows.iter().flatten().all(|r| r.len() == layout.len()),
            "replicate rows must match the layout"
        );
        Self {
            method,
            layout,
            n,
            rows,
            relabelled: 0,
        }
    }

    pub fn k_total(&self) -> usize {
        self.rows.len()
    }

    pub fn k_fitted(&self) -> usize {
        self.rows.iter().filter(|r| r.is_some()).count()
    }

    pub fn status(&self, k: usize) -> ReplicateStatus {
        if self.rows[k].is_some() {
            ReplicateStatus::Fitted
        } else {
            ReplicateStatus::NotFitted
        }
    }

    pub fn row(&self, k: usize) -> Option<&[f64]> {
        self.rows[k].as_deref()
    }

    /// Parameter vectors of fitted replicates, in replicate order.
    pub fn fitted(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.rows.iter().filter_map(|r| r.as_deref())
    }

    /// CSV with columns `replicate,status,param_1..param_d`, preceded by a
    /// `#` comment line carrying the layout. Values use shortest round-trip
    /// formatting, so parsing restores them exactly.
    pub fn to_csv(&self) -> String {
        let d = self.layout.len();
        let mut out = format!(
            "# method={} family={} g={} p={} n={} relabelled={}\n",
            self.method, self.layout.family, self.layout.g, self.layout.p, self.n, self.relabelled
        );
        out.push_str("replicate,status");
        (1..=d).for_each(|i| out.push_str(&format!(",param_{i}")));
        out.push('\n');
        for (k, row) in self.rows.iter().enumerate() {
            match row {
                Some(values) => {
                    out.push_str(&format!("{},fitted", k + 1));
                    values.iter().for_each(|v| out.push_str(&format!(",{v}")));
                }
                None => {
                    out.push_str(&format!("{},not_fitted", k + 1));
                    (0..d).for_each(|_| out.push(','));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let header = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| Error::Parse {
                row: 1,
                column: 1,
                message: "missing layout comment".into(),
            })?;
        let field = |key: &str| -> Result<&str> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| Error::Parse {
                    row: 1,
                    column: 1,
                    message: format!("missing `{key}` in layout comment"),
                })
        };
        let num = |key: &str| -> Result<usize> {
            field(key)?.parse().map_err(|_| Error::Parse {
                row: 1,
                column: 1,
                message: format!("bad `{key}` in layout comment"),
            })
        };
        let method: ReplicateMethod = field("method")?.parse()?;
        let layout = ParamLayout::new(num("g")?, num("p")?, field("family")?.parse()?);
        let n = num("n")?;
        let relabelled = num("relabelled")?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            let status = record.get(1).unwrap_or_default();
            let row = match status {
                "fitted" => {
                    let values = (0..layout.len())
                        .map(|j| {
                            record
                                .get(j + 2)
                                .and_then(|v| v.parse::<f64>().ok())
                                .ok_or_else(|| Error::Parse {
                                    row: r + 1,
                                    column: j + 3,
                                    message: "expected a number".into(),
                                })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Some(values)
                }
                "not_fitted" => None,
                other => {
                    return Err(Error::Parse {
                        row: r + 1,
                        column: 2,
                        message: format!("unknown status `{other}`"),
                    })
                }
            };
            rows.push(row);
        }
        let mut set = Self::from_rows(method, layout, n, rows);
        set.relabelled = relabelled;
        Ok(set)
    }
}

/// Fits the given replicate specs and assembles them in index order.
pub fn run_specs(
    data: &DataMatrix,
    full_fit: &FitResult,
    method: ReplicateMethod,
    specs: &[ReplicateSpec],
    config: &ResampleConfig,
) -> Result<ReplicateSet> {
    let (full_model, _) = full_parts(full_fit)?;
    let outcomes = map_indexed(specs.len(), config.execution, |k| {
        fit_replicate(data, full_fit, &specs[k], config)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let relabelled = outcomes.iter().filter(|o| o.relabelled).count();
    let rows: Vec<Option<Vec<f64>>> = outcomes.into_iter().map(|o| o.params).collect();
    if rows.iter().all(Option::is_none) {
        return Err(Error::AllReplicatesFailed { method });
    }
    let mut set = ReplicateSet::from_rows(method, ParamLayout::of(full_model), data.n(), rows);
    set.relabelled = relabelled;
    Ok(set)
}

/// Generates `k` replicates of `method` (`n` for the jackknife) and refits each.
pub fn run_resampling(
    data: &DataMatrix,
    full_fit: &FitResult,
    method: ReplicateMethod,
    k: usize,
    seed: u64,
    config: &ResampleConfig,
) -> Result<ReplicateSet> {
    let specs = replicate_specs(method, data.n(), k, seed);
    run_specs(data, full_fit, method, &specs, config)
}
