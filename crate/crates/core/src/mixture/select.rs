//! Model selection over (G, covariance family) by BIC, seeded from Ward
//! hierarchical clustering.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::data::DataMatrix;
use super::em::{em_fit, EmConfig, FitResult};
use super::model::{CovarianceFamily, ResponsibilityMatrix, WeightVector};
use crate::error::{Error, Result};

/// Labels from cutting the Ward (Euclidean) dendrogram into `g` groups.
/// Labels are numbered by first appearance in row order. `None` if `g > n`.
pub fn ward_labels(data: &DataMatrix, g: usize) -> Option<Vec<usize>> {
    let n = data.n();
    if g == 0 || g > n {
        return None;
    }
    if g == 1 {
        return Some(vec![0; n]);
    }
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let a = data.row(i);
        for j in i + 1..n {
            let b = data.row(j);
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            condensed.push(d2.sqrt());
        }
    }
    let dendrogram = kodama::linkage(&mut condensed, n, kodama::Method::Ward);

    // union-find over the first n - g merges; cluster n + s is created by step s
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (s, step) in dendrogram.steps().iter().take(n - g).enumerate() {
        let a = find(&mut parent, step.cluster1);
        let b = find(&mut parent, step.cluster2);
        parent[a] = n + s;
        parent[b] = n + s;
    }
    let mut roots: Vec<usize> = Vec::with_capacity(g);
    let labels = (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            match roots.iter().position(|&x| x == r) {
                Some(k) => k,
                None => {
                    roots.push(r);
                    roots.len() - 1
                }
            }
        })
        .collect();
    debug_assert_eq!(roots.len(), g);
    Some(labels)
}

/// Hard responsibilities from the Ward cut, or `None` if `g > n`.
pub fn ward_init(data: &DataMatrix, g: usize) -> Option<ResponsibilityMatrix> {
    ward_labels(data, g).map(|l| ResponsibilityMatrix::from_labels(&l, g))
}

/// Unweighted EM for one structure from the Ward initialization.
pub fn fit_structure(
    data: &DataMatrix,
    g: usize,
    family: CovarianceFamily,
    config: &EmConfig,
) -> Result<FitResult> {
    let init = ward_init(data, g).ok_or_else(|| {
        Error::InvalidInput(format!("cannot form {g} groups from {} rows", data.n()))
    })?;
    em_fit(data, &init, family, &WeightVector::ones(data.n()), config)
}

/// One (G, family) candidate and its BIC, `None` when the fit was degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub g: usize,
    pub family: CovarianceFamily,
    pub bic: Option<f64>,
}

/// Fits every candidate structure and returns them with the winning fit.
pub fn select_model_with_table(
    data: &DataMatrix,
    g_range: RangeInclusive<usize>,
    families: &[CovarianceFamily],
    config: &EmConfig,
) -> Result<(FitResult, Vec<Candidate>)> {
    if g_range.is_empty() || *g_range.start() == 0 || families.is_empty() {
        return Err(Error::InvalidInput("empty candidate set".into()));
    }
    let mut best: Option<FitResult> = None;
    let mut table = Vec::new();
    for g in g_range {
        for &family in families {
            let fit = match ward_init(data, g) {
                Some(init) => em_fit(data, &init, family, &WeightVector::ones(data.n()), config)?,
                None => {
                    table.push(Candidate {
                        g,
                        family,
                        bic: None,
                    });
                    continue;
                }
            };
            let bic = fit.is_fitted().then_some(fit.bic).filter(|b| b.is_finite());
            table.push(Candidate { g, family, bic });
            if let Some(b) = bic {
                if best.as_ref().is_none_or(|cur| b > cur.bic) {
                    best = Some(fit);
                }
            }
        }
    }
    best.map(|b| (b, table)).ok_or(Error::NoModelFits)
}

/// Fit with the largest BIC over `g_range × families`.
pub fn select_model(
    data: &DataMatrix,
    g_range: RangeInclusive<usize>,
    families: &[CovarianceFamily],
    config: &EmConfig,
) -> Result<FitResult> {
    select_model_with_table(data, g_range, families, config).map(|(fit, _)| fit)
}
