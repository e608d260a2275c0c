//! Coverage experiments: simulate datasets from known mixtures, estimate
//! standard errors with each resampling method, and count how often the
//! `MLE ± 2 SE` interval contains the true parameter.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, mix_seed};
use crate::linalg::{Cholesky, Matrix};
use crate::mixture::{
    fit_structure, select_model, CovarianceFamily, DataMatrix, FitResult, MixtureModel,
};
use crate::resample::{best_permutation, run_resampling, ReplicateMethod, ResampleConfig};
use crate::variance::{confidence_interval, flatten, interval_contains, variances, ParamLayout};

/// True mixture that simulated datasets are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationModelSpec {
    pub name: String,
    pub tau_true: Vec<f64>,
    pub mu_true: Vec<Vec<f64>>,
    pub sigma_true: Vec<Matrix>,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    150
}

impl SimulationModelSpec {
    pub fn g(&self) -> usize {
        self.tau_true.len()
    }

    pub fn p(&self) -> usize {
        self.mu_true.first().map_or(0, Vec::len)
    }

    pub fn true_model(&self) -> MixtureModel {
        MixtureModel {
            family: CovarianceFamily::FullVarying,
            weights: self.tau_true.clone(),
            means: self.mu_true.clone(),
            covariances: self.sigma_true.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput(
                "simulation sample size must be positive".into(),
            ));
        }
        self.true_model().validate()
    }

    /// Copy with every mean multiplied by `factor` (larger is easier to separate).
    pub fn with_mean_scale(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.mu_true.iter_mut().flatten().for_each(|v| *v *= factor);
        s
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

fn spec(name: &str, tau: &[f64], mu: &[[f64; 2]], sigma: &[[[f64; 2]; 2]]) -> SimulationModelSpec {
    SimulationModelSpec {
        name: name.to_string(),
        tau_true: tau.to_vec(),
        mu_true: mu.iter().map(|m| m.to_vec()).collect(),
        sigma_true: sigma
            .iter()
            .map(|s| Matrix::from_rows(&[s[0].to_vec(), s[1].to_vec()]))
            .collect(),
        n: default_n(),
    }
}

/// Models M1-M8. Weights and covariance matrices are the published
/// settings; the means are chosen here to give non-overlapping (M1, M3, M5,
/// M7) and overlapping (M2, M4, M6, M8) clusters and can be overridden.
pub fn builtin_specs() -> BTreeMap<String, SimulationModelSpec> {
    let g2_sigma = [[[0.12, 0.09], [0.09, 0.12]], [[0.47, 0.13], [0.13, 0.11]]];
    let g3_sigma = [
        [[0.12, 0.09], [0.09, 0.12]],
        [[0.39, 0.15], [0.15, 0.10]],
        [[0.53, 0.20], [0.20, 0.09]],
    ];
    let small2 = [0.05, 0.95];
    let even2 = [0.4, 0.6];
    let small3 = [0.05, 0.05, 0.9];
    let even3 = [0.3, 0.3, 0.4];
    let apart2 = [[0.0, 0.0], [3.0, 3.0]];
    let close2 = [[0.0, 0.0], [1.5, 1.5]];
    let apart3 = [[0.0, 0.0], [3.0, 3.0], [-3.0, 3.0]];
    let close3 = [[0.0, 0.0], [1.5, 1.5], [-1.5, 1.5]];
    [
        spec("M1", &small2, &apart2, &g2_sigma),
        spec("M2", &small2, &close2, &g2_sigma),
        spec("M3", &even2, &apart2, &g2_sigma),
        spec("M4", &even2, &close2, &g2_sigma),
        spec("M5", &small3, &apart3, &g3_sigma),
        spec("M6", &small3, &close3, &g3_sigma),
        spec("M7", &even3, &apart3, &g3_sigma),
        spec("M8", &even3, &close3, &g3_sigma),
    ]
    .into_iter()
    .map(|s| (s.name.clone(), s))
    .collect()
}

pub fn builtin_spec(name: &str) -> Result<SimulationModelSpec> {
    builtin_specs()
        .remove(&name.to_ascii_uppercase())
        .ok_or_else(|| Error::InvalidInput(format!("unknown simulation model `{name}`")))
}

/// Draws `spec.n` labelled observations.
pub fn sample_labeled(spec: &SimulationModelSpec, seed: u64) -> (DataMatrix, Vec<usize>) {
    let p = spec.p();
    let factors: Vec<Cholesky> = spec
        .sigma_true
        .iter()
        .map(|s| Cholesky::new(s, 0.0).expect("simulation covariances are positive definite"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(spec.n * p);
    let mut labels = Vec::with_capacity(spec.n);
    let mut z = vec![0.0; p];
    let mut x = vec![0.0; p];
    for _ in 0..spec.n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut label = spec.g() - 1;
        for (k, t) in spec.tau_true.iter().enumerate() {
            acc += t;
            if u < acc {
                label = k;
                break;
            }
        }
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        factors[label].mul_lower(&z, &mut x);
        values.extend(x.iter().zip(&spec.mu_true[label]).map(|(a, m)| a + m));
        labels.push(label);
    }
    let data = DataMatrix::new(values, spec.n, p).expect("simulated values are finite");
    (data, labels)
}

pub fn sample_dataset(spec: &SimulationModelSpec, seed: u64) -> DataMatrix {
    sample_labeled(spec, seed).0
}

/// When a simulated dataset counts as fitted for a method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedRule {
    /// Every replicate must be fitted.
    AllReplicates,
    /// At least this many replicates must be fitted (minimum 2).
    MinReplicates(usize),
}

impl FittedRule {
    fn accepts(self, fitted: usize, total: usize) -> bool {
        match self {
            FittedRule::AllReplicates => total >= 2 && fitted == total,
            FittedRule::MinReplicates(m) => fitted >= m.max(2),
        }
    }
}

/// How each simulated dataset's full-data model is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// The generating `G` with unconstrained covariances.
    True,
    /// BIC selection over `1..=g_max` and all families.
    Selected { g_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub datasets: usize,
    /// Bootstrap and WLBS replicate count (the jackknife always uses `n`).
    pub replicates: usize,
    pub seed: u64,
    pub fitted_rule: FittedRule,
    pub structure: Structure,
    pub resample: ResampleConfig,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            datasets: 1000,
            replicates: crate::resample::DEFAULT_REPLICATES,
            seed: 0,
            fitted_rule: FittedRule::AllReplicates,
            structure: Structure::True,
            resample: ResampleConfig::default(),
        }
    }
}

/// Coverage counts for one model and method. `covered[s]` counts datasets
/// whose interval for slot `s` contains the true value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub model: String,
    pub method: ReplicateMethod,
    pub datasets_total: usize,
    pub datasets_fitted: usize,
    pub slots: Vec<String>,
    pub covered: Vec<usize>,
}

impl CoverageResult {
    pub fn covered_slot(&self, slot: &str) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s == slot)
            .map(|i| self.covered[i])
    }
}

/// Per-dataset, per-method containment flags; `None` when not fitted.
type DatasetOutcome = Vec<Option<Vec<bool>>>;

fn full_fit(
    data: &DataMatrix,
    spec: &SimulationModelSpec,
    config: &CoverageConfig,
) -> Option<FitResult> {
    let em = &config.resample.em;
    let fit = match config.structure {
        Structure::True => fit_structure(data, spec.g(), CovarianceFamily::FullVarying, em).ok()?,
        Structure::Selected { g_max } => {
            select_model(data, 1..=g_max, &CovarianceFamily::ALL, em).ok()?
        }
    };
    let model = fit.model.as_ref()?;
    (model.g() == spec.g()).then_some(())?;
    // relabel so component k is the one nearest true component k
    let perm = best_permutation(
        &spec.mu_true,
        &model.means,
        Some(&spec.true_model().pooled_covariance()),
    );
    let model = model.permuted(&perm);
    let resp = fit.responsibilities.as_ref()?.permuted(&perm);
    Some(FitResult {
        model: Some(model),
        responsibilities: Some(resp),
        ..fit
    })
}

fn dataset_outcome(
    spec: &SimulationModelSpec,
    methods: &[ReplicateMethod],
    config: &CoverageConfig,
    index: usize,
) -> DatasetOutcome {
    let data = sample_dataset(spec, mix_seed(config.seed, 2 * index as u64));
    let Some(fit) = full_fit(&data, spec, config) else {
        return vec![None; methods.len()];
    };
    let model = fit.model.as_ref().expect("full fit is not degenerate");
    let estimates = flatten(model);
    let truth = flatten(&spec.true_model());
    let comparable: Vec<Option<f64>> = if estimates.layout == truth.layout {
        truth.values.iter().copied().map(Some).collect()
    } else {
        // only weights and means line up across families
        let shared = spec.g() * (1 + spec.p());
        (0..truth.values.len())
            .map(|i| (i < shared).then(|| truth.values[i]))
            .collect()
    };
    let resample_seed = mix_seed(config.seed, 2 * index as u64 + 1);
    methods
        .iter()
        .map(|&method| {
            let set = run_resampling(
                &data,
                &fit,
                method,
                config.replicates,
                resample_seed,
                &config.resample,
            )
            .ok()?;
            if !config.fitted_rule.accepts(set.k_fitted(), set.k_total()) {
                return None;
            }
            let var = variances(&set).ok()?;
            Some(
                comparable
                    .iter()
                    .enumerate()
                    .map(|(s, t)| {
                        let Some(t) = t else { return false };
                        let ci = confidence_interval(estimates.values[s], var[s].max(0.0).sqrt());
                        interval_contains(ci, *t)
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Coverage for several methods on the same simulated datasets.
pub fn run_coverage_methods(
    spec: &SimulationModelSpec,
    methods: &[ReplicateMethod],
    config: &CoverageConfig,
) -> Result<Vec<CoverageResult>> {
    spec.validate()?;
    let slots = ParamLayout::new(spec.g(), spec.p(), CovarianceFamily::FullVarying).names();
    let outcomes = map_indexed(config.datasets, config.resample.execution, |d| {
        dataset_outcome(spec, methods, config, d)
    });
    Ok(methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let mut covered = vec![0; slots.len()];
            let mut fitted = 0;
            for flags in outcomes.iter().filter_map(|o| o[m].as_ref()) {
                fitted += 1;
                for (c, &hit) in covered.iter_mut().zip(flags) {
                    *c += usize::from(hit);
                }
            }
            CoverageResult {
                model: spec.name.clone(),
                method,
                datasets_total: config.datasets,
                datasets_fitted: fitted,
                slots: slots.clone(),
                covered,
            }
        })
        .collect())
}

pub fn run_coverage(
    spec: &SimulationModelSpec,
    method: ReplicateMethod,
    config: &CoverageConfig,
) -> Result<CoverageResult> {
    run_coverage_methods(spec, &[method], config).map(|mut v| v.remove(0))
}

/// Table with one row per model and column groups coverage × method and
/// number fitted × method, for a single parameter slot.
pub fn coverage_table_csv(results: &[CoverageResult], slot: &str) -> String {
    let mut models: Vec<&str> = Vec::new();
    for r in results {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
    }
    let mut out = String::from(
        "model,slot,datasets,coverage_jk,coverage_bs,coverage_wlbs,fitted_jk,fitted_bs,fitted_wlbs\n",
    );
    for model in models {
        let find = |m: ReplicateMethod| results.iter().find(|r| r.model == model && r.method == m);
        let total = results
            .iter()
            .find(|r| r.model == model)
            .map_or(0, |r| r.datasets_total);
        let cells = |f: &dyn Fn(&CoverageResult) -> Option<usize>| -> Vec<String> {
            ReplicateMethod::ALL
                .iter()
                .map(|&m| {
                    find(m)
                        .and_then(f)
                        .map(|v| v.to_string())
                        .unwrap_or_default()
                })
                .collect()
        };
        let coverage = cells(&|r| r.covered_slot(slot));
        let fitted = cells(&|r| Some(r.datasets_fitted));
        out.push_str(&format!(
            "{model},{slot},{total},{},{}\n",
            coverage.join(","),
            fitted.join(",")
        ));
    }
    out
}
