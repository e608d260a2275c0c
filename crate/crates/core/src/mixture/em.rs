//! Expectation-maximization for (observation-weighted) Gaussian mixtures.
//!
//! The weighted complete-data likelihood raises each observation's
//! contribution `τ_g f(x_i | μ_g, Σ_g)` to the power `z_ig w_i`. The E-step is
//! therefore the ordinary posterior computation and only the M-step sees the
//! weights. With all weights equal to one every multiplication by `w_i` is
//! exact, so the weighted path reproduces the unweighted fit bit for bit.

use serde::{Deserialize, Serialize};

use super::data::DataMatrix;
use super::model::{CovarianceFamily, MixtureModel, ResponsibilityMatrix, WeightVector};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Relative tolerance on the change in log-likelihood between iterations.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest accepted `min(L_ii)² / max(L_ii)²` of a covariance Cholesky factor.
    pub min_rcond: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
            min_rcond: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterReached,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// `None` iff `status` is `Degenerate`.
    pub model: Option<MixtureModel>,
    pub responsibilities: Option<ResponsibilityMatrix>,
    /// Observed-data log-likelihood `Σ_i log Σ_g τ_g f(x_i)`.
    pub loglik: f64,
    /// `Σ_i w_i log Σ_g τ_g f(x_i)`; equals `loglik` for unit weights.
    pub weighted_loglik: f64,
    pub bic: f64,
    pub iterations: usize,
    pub status: FitStatus,
    /// Objective after every E-step.
    pub loglik_trace: Vec<f64>,
    /// Reason for a degenerate fit.
    pub failure: Option<String>,
}

impl FitResult {
    pub fn is_fitted(&self) -> bool {
        self.status != FitStatus::Degenerate
    }

    pub fn g(&self) -> Option<usize> {
        self.model.as_ref().map(MixtureModel::g)
    }

    fn degenerate(iterations: usize, trace: Vec<f64>, err: &Error) -> Self {
        Self {
            model: None,
            responsibilities: None,
            loglik: f64::NAN,
            weighted_loglik: f64::NAN,
            bic: f64::NAN,
            iterations,
            status: FitStatus::Degenerate,
            loglik_trace: trace,
            failure: Some(err.to_string()),
        }
    }
}

/// Log density of `N(mean, cov)` at `x` through a Cholesky factorization.
pub fn log_density(x: &[f64], mean: &[f64], cov: &Matrix) -> Result<f64> {
    let p = mean.len();
    if x.len() != p || cov.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: x.len().min(cov.dim()),
        });
    }
    let chol = Cholesky::new(cov, 0.0).ok_or(Error::DegenerateCovariance { component: 0 })?;
    let mut scratch = vec![0.0; p];
    let maha = chol.mahalanobis_sq(x, mean, &mut scratch);
    Ok(-0.5 * (p as f64 * LN_2PI + chol.log_det() + maha))
}

/// Smallest effective mass `Σ_i w_i z_ig` from which a `p × p` covariance is estimated.
pub fn min_cluster_mass(p: usize) -> f64 {
    (p + 1) as f64
}

struct Component<'a> {
    chol: Cholesky,
    mean: &'a [f64],
    /// `log τ_g − (p/2) log 2π − ½ log det Σ_g`
    offset: f64,
}

fn components(model: &MixtureModel, min_rcond: f64) -> Result<Vec<Component<'_>>> {
    let p = model.p() as f64;
    let mut out: Vec<Component<'_>> = Vec::with_capacity(model.g());
    for (k, cov) in model.covariances.iter().enumerate() {
        let chol = if model.family.is_shared() && k > 0 {
            out[0].chol.clone()
        } else {
            Cholesky::new(cov, min_rcond).ok_or(Error::DegenerateCovariance { component: k })?
        };
        let offset = model.weights[k].ln() - 0.5 * (p * LN_2PI + chol.log_det());
        out.push(Component {
            chol,
            mean: &model.means[k],
            offset,
        });
    }
    Ok(out)
}

/// Writes posterior probabilities into `z` and returns
/// `(Σ_i ℓ_i, Σ_i w_i ℓ_i)` where `ℓ_i` is the log mixture density of row `i`.
pub(crate) fn e_step_into(
    data: &DataMatrix,
    model: &MixtureModel,
    weights: &[f64],
    min_rcond: f64,
    z: &mut ResponsibilityMatrix,
) -> Result<(f64, f64)> {
    let comps = components(model, min_rcond)?;
    let mut scratch = vec![0.0; data.p()];
    let mut loglik = 0.0;
    let mut weighted = 0.0;
    for (i, x) in data.rows().enumerate() {
        let row = z.row_mut(i);
        let mut max = f64::NEG_INFINITY;
        for (r, c) in row.iter_mut().zip(&comps) {
            *r = c.offset - 0.5 * c.chol.mahalanobis_sq(x, c.mean, &mut scratch);
            max = max.max(*r);
        }
        let mut sum = 0.0;
        for r in row.iter_mut() {
            *r = (*r - max).exp();
            sum += *r;
        }
        let inv = 1.0 / sum;
        row.iter_mut().for_each(|r| *r *= inv);
        let lse = max + sum.ln();
        loglik += lse;
        weighted += weights[i] * lse;
    }
    Ok((loglik, weighted))
}

/// Posterior membership probabilities and observed-data log-likelihood.
pub fn e_step(data: &DataMatrix, model: &MixtureModel) -> Result<(ResponsibilityMatrix, f64)> {
    if data.p() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p(),
            found: data.p(),
        });
    }
    let mut z = ResponsibilityMatrix::zeros(data.n(), model.g());
    let ones = vec![1.0; data.n()];
    let (loglik, _) = e_step_into(data, model, &ones, 0.0, &mut z)?;
    Ok((z, loglik))
}

/// Observed-data log-likelihood of `model` on `data`.
pub fn loglik(data: &DataMatrix, model: &MixtureModel) -> Result<f64> {
    e_step(data, model).map(|(_, ll)| ll)
}

/// Maximizer of the expected weighted complete-data log-likelihood.
pub fn weighted_m_step(
    data: &DataMatrix,
    resp: &ResponsibilityMatrix,
    weights: &WeightVector,
    family: CovarianceFamily,
) -> Result<MixtureModel> {
    m_step(
        data,
        resp,
        weights.as_slice(),
        family,
        EmConfig::default().min_rcond,
    )
}

pub(crate) fn m_step(
    data: &DataMatrix,
    resp: &ResponsibilityMatrix,
    weights: &[f64],
    family: CovarianceFamily,
    min_rcond: f64,
) -> Result<MixtureModel> {
    let (n, p, g) = (data.n(), data.p(), resp.g());
    if resp.n() != n || weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if resp.n() != n {
                resp.n()
            } else {
                weights.len()
            },
        });
    }
    let min_mass = min_cluster_mass(p);
    let mut mass = vec![0.0; g];
    let mut means = vec![vec![0.0; p]; g];
    let mut total = 0.0;
    for (i, x) in data.rows().enumerate() {
        let w = weights[i];
        total += w;
        for (k, &zk) in resp.row(i).iter().enumerate() {
            let wz = w * zk;
            mass[k] += wz;
            for (m, xv) in means[k].iter_mut().zip(x) {
                *m += wz * xv;
            }
        }
    }
    for (k, (m, &mk)) in means.iter_mut().zip(&mass).enumerate() {
        if mk.is_nan() || mk < min_mass {
            return Err(Error::EmptyCluster {
                component: k,
                mass: mk,
                minimum: min_mass,
            });
        }
        m.iter_mut().for_each(|v| *v /= mk);
    }

    let mut scatter = vec![Matrix::zeros(p); g];
    let mut diff = vec![0.0; p];
    for (i, x) in data.rows().enumerate() {
        let w = weights[i];
        for (k, &zk) in resp.row(i).iter().enumerate() {
            let wz = w * zk;
            if wz == 0.0 {
                continue;
            }
            for ((d, xv), mv) in diff.iter_mut().zip(x).zip(&means[k]) {
                *d = xv - mv;
            }
            scatter[k].add_outer_upper(&diff, wz);
        }
    }
    scatter.iter_mut().for_each(Matrix::mirror_upper);

    let covariances = match family {
        CovarianceFamily::FullVarying => scatter
            .into_iter()
            .zip(&mass)
            .map(|(mut s, &mk)| {
                s.scale(1.0 / mk);
                s
            })
            .collect(),
        CovarianceFamily::FullEqual => {
            let mut pooled = Matrix::zeros(p);
            scatter.iter().for_each(|s| pooled.add_assign(s));
            pooled.scale(1.0 / total);
            vec![pooled; g]
        }
        CovarianceFamily::SphericalVarying => scatter
            .iter()
            .zip(&mass)
            .map(|(s, &mk)| Matrix::scaled_identity(p, s.trace() / (p as f64 * mk)))
            .collect(),
        CovarianceFamily::SphericalEqual => {
            let tr: f64 = scatter.iter().map(Matrix::trace).sum();
            vec![Matrix::scaled_identity(p, tr / (p as f64 * total)); g]
        }
    };
    for (k, cov) in covariances.iter().enumerate() {
        if !cov.is_finite() || Cholesky::new(cov, min_rcond).is_none() {
            return Err(Error::DegenerateCovariance { component: k });
        }
    }
    let weights_out = mass.iter().map(|m| m / total).collect();
    Ok(MixtureModel {
        family,
        weights: weights_out,
        means,
        covariances,
    })
}

/// EM from a responsibility matrix: M-step first, then alternate E and M
/// until the relative change of the objective drops below `config.tol`.
///
/// Degeneracy (an empty cluster or a singular covariance) is reported in the
/// returned status, not as an error. Errors are reserved for inconsistent
/// input shapes.
pub fn em_fit(
    data: &DataMatrix,
    init: &ResponsibilityMatrix,
    family: CovarianceFamily,
    weights: &WeightVector,
    config: &EmConfig,
) -> Result<FitResult> {
    let n = data.n();
    if init.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: init.n(),
        });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    let w = weights.as_slice();
    let unit = weights.is_unit();
    let mut z = init.clone();
    let mut trace = Vec::new();
    let mut prev: Option<f64> = None;
    let mut status = FitStatus::MaxIterReached;
    let mut model = None;
    let mut lls = (f64::NAN, f64::NAN);
    let mut iterations = 0;

    while iterations < config.max_iter.max(1) {
        iterations += 1;
        let m = match m_step(data, &z, w, family, config.min_rcond) {
            Ok(m) => m,
            Err(e) if e.is_degeneracy() => return Ok(FitResult::degenerate(iterations, trace, &e)),
            Err(e) => return Err(e),
        };
        lls = match e_step_into(data, &m, w, config.min_rcond, &mut z) {
            Ok(v) => v,
            Err(e) if e.is_degeneracy() => return Ok(FitResult::degenerate(iterations, trace, &e)),
            Err(e) => return Err(e),
        };
        model = Some(m);
        let objective = if unit { lls.0 } else { lls.1 };
        trace.push(objective);
        if !objective.is_finite() {
            let e = Error::InvalidInput("non-finite log-likelihood".into());
            return Ok(FitResult::degenerate(iterations, trace, &e));
        }
        if let Some(p) = prev {
            if (objective - p).abs() <= config.tol * objective.abs() {
                status = FitStatus::Converged;
                break;
            }
        }
        prev = Some(objective);
    }

    let model = model.expect("at least one iteration ran");
    let bic = bic_value(
        lls.0,
        model.family.free_params(model.g(), model.p()),
        n as f64,
    );
    Ok(FitResult {
        model: Some(model),
        responsibilities: Some(z),
        loglik: lls.0,
        weighted_loglik: lls.1,
        bic,
        iterations,
        status,
        loglik_trace: trace,
        failure: None,
    })
}

/// `2·loglik − k·log n`; larger is better.
pub fn bic_value(loglik: f64, free_params: usize, n: f64) -> f64 {
    2.0 * loglik - free_params as f64 * n.ln()
}

/// BIC of a fitted model on `n` observations. NaN for degenerate fits.
pub fn bic(fit: &FitResult, n: usize) -> f64 {
    match &fit.model {
        Some(m) => bic_value(fit.loglik, m.family.free_params(m.g(), m.p()), n as f64),
        None => f64::NAN,
    }
}
