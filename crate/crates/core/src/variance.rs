//! Standard errors, parameter covariances, confidence intervals and kernel
//! density curves computed from a [`ReplicateSet`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mixture::{CovarianceFamily, MixtureModel};
use crate::resample::{ReplicateMethod, ReplicateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Tau,
    Mu,
    Sigma,
}

/// One entry of a flattened parameter vector. Component and coordinate
/// indices are zero-based; names are one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub kind: SlotKind,
    /// `None` for covariance entries shared by all components.
    pub component: Option<usize>,
    /// Row and column of a covariance entry, or the coordinate of a mean.
    pub coords: (usize, usize),
    spherical: bool,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.component) {
            (SlotKind::Tau, Some(g)) => write!(f, "tau[{}]", g + 1),
            (SlotKind::Mu, Some(g)) => write!(f, "mu[{}][{}]", g + 1, self.coords.0 + 1),
            (SlotKind::Sigma, c) => {
                let prefix = c.map(|g| format!("[{}]", g + 1)).unwrap_or_default();
                if self.spherical {
                    write!(f, "sigma{prefix}")
                } else {
                    write!(
                        f,
                        "sigma{prefix}[{},{}]",
                        self.coords.0 + 1,
                        self.coords.1 + 1
                    )
                }
            }
            (_, None) => unreachable!("tau and mu slots always have a component"),
        }
    }
}

/// Slot order of a flattened mixture: `τ_1..τ_G`, then `μ_g` row by row,
/// then the family's free covariance entries (upper triangle, row-major).
/// Spherical families store the variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub g: usize,
    pub p: usize,
    pub family: CovarianceFamily,
}

impl ParamLayout {
    pub fn new(g: usize, p: usize, family: CovarianceFamily) -> Self {
        Self { g, p, family }
    }

    pub fn of(model: &MixtureModel) -> Self {
        Self::new(model.g(), model.p(), model.family)
    }

    pub fn len(&self) -> usize {
        self.g + self.g * self.p + self.family.covariance_params(self.g, self.p)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slots(&self) -> Vec<Slot> {
        let (g, p) = (self.g, self.p);
        let mut out = Vec::with_capacity(self.len());
        let slot = |kind, component, coords, spherical| Slot {
            kind,
            component,
            coords,
            spherical,
        };
        out.extend((0..g).map(|k| slot(SlotKind::Tau, Some(k), (0, 0), false)));
        for k in 0..g {
            out.extend((0..p).map(|j| slot(SlotKind::Mu, Some(k), (j, 0), false)));
        }
        let components: Vec<Option<usize>> = if self.family.is_shared() {
            vec![None]
        } else {
            (0..g).map(Some).collect()
        };
        for c in components {
            if self.family.is_spherical() {
                out.push(slot(SlotKind::Sigma, c, (0, 0), true));
            } else {
                for i in 0..p {
                    for j in i..p {
                        out.push(slot(SlotKind::Sigma, c, (i, j), false));
                    }
                }
            }
        }
        out
    }

    pub fn names(&self) -> Vec<String> {
        self.slots().iter().map(Slot::to_string).collect()
    }

    /// Resolves a slot name. Covariance entries accept either triangle, and a
    /// component index on a shared covariance is ignored.
    pub fn slot_index(&self, name: &str) -> Result<usize> {
        let canonical: String = name.chars().filter(|c| !c.is_whitespace()).collect();
        let names = self.names();
        if let Some(i) = names.iter().position(|n| *n == canonical) {
            return Ok(i);
        }
        let unknown = || Error::UnknownSlot(name.to_string());
        let rest = canonical.strip_prefix("sigma").ok_or_else(unknown)?;
        let parts: Vec<&str> = rest.split(['[', ']']).filter(|s| !s.is_empty()).collect();
        let parse = |s: &str| s.parse::<usize>().ok().filter(|&v| v >= 1);
        let (component, entry) = match parts.as_slice() {
            [c, e] if !c.contains(',') => (parse(c), Some(*e)),
            [x] if x.contains(',') => (None, Some(*x)),
            [c] => (parse(c), None),
            [] => (None, None),
            _ => return Err(unknown()),
        };
        let candidate = match entry {
            Some(e) => {
                let (a, b) = e.split_once(',').ok_or_else(unknown)?;
                let (a, b) = (parse(a).ok_or_else(unknown)?, parse(b).ok_or_else(unknown)?);
                let (i, j) = (a.min(b), a.max(b));
                match (self.family.is_shared(), component) {
                    (true, _) => format!("sigma[{i},{j}]"),
                    (false, Some(c)) => format!("sigma[{c}][{i},{j}]"),
                    (false, None) => return Err(unknown()),
                }
            }
            None => match (self.family.is_shared(), component) {
                (true, _) => "sigma".to_string(),
                (false, Some(c)) => format!("sigma[{c}]"),
                (false, None) => return Err(unknown()),
            },
        };
        names
            .iter()
            .position(|n| *n == candidate)
            .ok_or_else(unknown)
    }
}

/// Flattened mixture parameters with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn names(&self) -> Vec<String> {
        self.layout.names()
    }
}

pub fn flatten(model: &MixtureModel) -> ParamVector {
    let layout = ParamLayout::of(model);
    let mut values = Vec::with_capacity(layout.len());
    values.extend_from_slice(&model.weights);
    model.means.iter().for_each(|m| values.extend_from_slice(m));
    let covs = if model.family.is_shared() {
        &model.covariances[..1]
    } else {
        &model.covariances[..]
    };
    for cov in covs {
        if model.family.is_spherical() {
            values.push(cov[(0, 0)]);
        } else {
            for i in 0..layout.p {
                for j in i..layout.p {
                    values.push(cov[(i, j)]);
                }
            }
        }
    }
    ParamVector { layout, values }
}

pub fn unflatten(params: &ParamVector) -> Result<MixtureModel> {
    let ParamLayout { g, p, family } = params.layout;
    if params.values.len() != params.layout.len() {
        return Err(Error::DimensionMismatch {
            expected: params.layout.len(),
            found: params.values.len(),
        });
    }
    let v = &params.values;
    let weights = v[..g].to_vec();
    let means = v[g..g + g * p].chunks(p).map(<[f64]>::to_vec).collect();
    let mut rest = v[g + g * p..].iter().copied();
    let mut next_cov = || {
        if family.is_spherical() {
            Matrix::scaled_identity(p, rest.next().unwrap_or(f64::NAN))
        } else {
            let mut m = Matrix::zeros(p);
            for i in 0..p {
                for j in i..p {
                    m[(i, j)] = rest.next().unwrap_or(f64::NAN);
                }
            }
            m.mirror_upper();
            m
        }
    };
    let covariances = if family.is_shared() {
        vec![next_cov(); g]
    } else {
        (0..g).map(|_| next_cov()).collect()
    };
    Ok(MixtureModel {
        family,
        weights,
        means,
        covariances,
    })
}

fn fitted_rows(set: &ReplicateSet) -> Result<Vec<&[f64]>> {
    let rows: Vec<&[f64]> = set.fitted().collect();
    if rows.len() < 2 {
        return Err(Error::InsufficientReplicates { fitted: rows.len() });
    }
    Ok(rows)
}

fn column_means(rows: &[&[f64]], d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    mean
}

/// Multiplier applied to the centred sum of cross-products.
fn spread_factor(set: &ReplicateSet, fitted: usize) -> f64 {
    match set.method {
        ReplicateMethod::Jackknife => (set.n as f64 - 1.0) / set.n as f64,
        ReplicateMethod::Bootstrap | ReplicateMethod::Wlbs => 1.0 / (fitted as f64 - 1.0),
    }
}

fn variance_by_method(set: &ReplicateSet) -> Result<Vec<f64>> {
    let rows = fitted_rows(set)?;
    let d = set.layout.len();
    let mean = column_means(&rows, d);
    let mut ss = vec![0.0; d];
    for r in &rows {
        for ((s, v), m) in ss.iter_mut().zip(r.iter()).zip(&mean) {
            let dev = v - m;
            *s += dev * dev;
        }
    }
    let factor = spread_factor(set, rows.len());
    Ok(ss.into_iter().map(|s| s * factor).collect())
}

/// `((n−1)/n) Σ_m (ψ_m − ψ̄)²` per slot over fitted jackknife replicates.
pub fn jk_variance(set: &ReplicateSet) -> Result<Vec<f64>> {
    if set.method != ReplicateMethod::Jackknife {
        return Err(Error::InvalidInput(format!(
            "jackknife variance requested for {} replicates",
            set.method
        )));
    }
    variance_by_method(set)
}

/// Sample variance (denominator `K_fitted − 1`) per slot; serves BS and WLBS.
pub fn bs_variance(set: &ReplicateSet) -> Result<Vec<f64>> {
    if set.method == ReplicateMethod::Jackknife {
        return Err(Error::InvalidInput(
            "bootstrap variance requested for jackknife replicates".into(),
        ));
    }
    variance_by_method(set)
}

/// Variance appropriate to the set's resampling method.
pub fn variances(set: &ReplicateSet) -> Result<Vec<f64>> {
    variance_by_method(set)
}

/// Cross-moment analogue of the method's variance formula between two slots.
pub fn param_covariance(set: &ReplicateSet, slot_a: usize, slot_b: usize) -> Result<f64> {
    let d = set.layout.len();
    if slot_a >= d || slot_b >= d {
        return Err(Error::InvalidInput(format!(
            "slot index out of range for {d} slots"
        )));
    }
    let rows = fitted_rows(set)?;
    let k = rows.len() as f64;
    let mean_a = rows.iter().map(|r| r[slot_a]).sum::<f64>() / k;
    let mean_b = rows.iter().map(|r| r[slot_b]).sum::<f64>() / k;
    let cross: f64 = rows
        .iter()
        .map(|r| (r[slot_a] - mean_a) * (r[slot_b] - mean_b))
        .sum();
    Ok(cross * spread_factor(set, rows.len()))
}

/// Closed interval `center ± 2·se`.
pub fn confidence_interval(center: f64, se: f64) -> (f64, f64) {
    (center - 2.0 * se, center + 2.0 * se)
}

/// Boundary-inclusive containment.
pub fn interval_contains((lower, upper): (f64, f64), value: f64) -> bool {
    lower <= value && value <= upper
}

/// Estimates, standard errors and `MLE ± 2 SE` intervals for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "report_json::SeReportJson",
    try_from = "report_json::SeReportJson"
)]
pub struct SeReport {
    pub method: ReplicateMethod,
    pub estimates: ParamVector,
    pub std_errors: Vec<f64>,
    pub replicate_mean: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub k_fitted: usize,
    pub k_total: usize,
    /// Replicates whose components were reordered to match the full fit.
    pub relabelled: usize,
    pub elapsed_seconds: Option<f64>,
}

impl SeReport {
    pub fn from_replicates(full_model: &MixtureModel, set: &ReplicateSet) -> Result<Self> {
        let estimates = flatten(full_model);
        if estimates.layout != set.layout {
            return Err(Error::InvalidInput(
                "replicate layout differs from the full model".into(),
            ));
        }
        let vars = variances(set)?;
        let std_errors: Vec<f64> = vars.iter().map(|v| v.max(0.0).sqrt()).collect();
        let rows: Vec<&[f64]> = set.fitted().collect();
        let replicate_mean = column_means(&rows, set.layout.len());
        Ok(confidence_intervals(
            set.method,
            estimates,
            std_errors,
            replicate_mean,
            set.k_fitted(),
            set.k_total(),
            set.relabelled,
        ))
    }

    pub fn names(&self) -> Vec<String> {
        self.estimates.names()
    }

    pub fn interval(&self, slot: usize) -> (f64, f64) {
        (self.ci_lower[slot], self.ci_upper[slot])
    }
}

/// Assembles a report with intervals centred on the full-data estimates.
pub fn confidence_intervals(
    method: ReplicateMethod,
    estimates: ParamVector,
    std_errors: Vec<f64>,
    replicate_mean: Vec<f64>,
    k_fitted: usize,
    k_total: usize,
    relabelled: usize,
) -> SeReport {
    let (ci_lower, ci_upper) = estimates
        .values
        .iter()
        .zip(&std_errors)
        .map(|(&c, &se)| confidence_interval(c, se))
        .unzip();
    SeReport {
        method,
        estimates,
        std_errors,
        replicate_mean,
        ci_lower,
        ci_upper,
        k_fitted,
        k_total,
        relabelled,
        elapsed_seconds: None,
    }
}

mod report_json {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub struct Entry {
        pub name: String,
        pub estimate: f64,
        pub std_error: f64,
        pub ci_lower: f64,
        pub ci_upper: f64,
        pub replicate_mean: f64,
    }

    #[derive(Serialize, Deserialize, Default)]
    pub struct Parameters {
        pub tau: Vec<Entry>,
        pub mu: Vec<Entry>,
        pub sigma: Vec<Entry>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct SeReportJson {
        pub method: ReplicateMethod,
        pub family: CovarianceFamily,
        pub g: usize,
        pub p: usize,
        pub k_fitted: usize,
        pub k_total: usize,
        pub relabelled: usize,
        pub elapsed_seconds: Option<f64>,
        pub parameters: Parameters,
    }

    impl From<SeReport> for SeReportJson {
        fn from(r: SeReport) -> Self {
            let layout = r.estimates.layout;
            let mut parameters = Parameters::default();
            for (i, slot) in layout.slots().iter().enumerate() {
                let entry = Entry {
                    name: slot.to_string(),
                    estimate: r.estimates.values[i],
                    std_error: r.std_errors[i],
                    ci_lower: r.ci_lower[i],
                    ci_upper: r.ci_upper[i],
                    replicate_mean: r.replicate_mean[i],
                };
                match slot.kind {
                    SlotKind::Tau => parameters.tau.push(entry),
                    SlotKind::Mu => parameters.mu.push(entry),
                    SlotKind::Sigma => parameters.sigma.push(entry),
                }
            }
            Self {
                method: r.method,
                family: layout.family,
                g: layout.g,
                p: layout.p,
                k_fitted: r.k_fitted,
                k_total: r.k_total,
                relabelled: r.relabelled,
                elapsed_seconds: r.elapsed_seconds,
                parameters,
            }
        }
    }

    impl TryFrom<SeReportJson> for SeReport {
        type Error = Error;

        fn try_from(j: SeReportJson) -> Result<Self> {
            let layout = ParamLayout::new(j.g, j.p, j.family);
            let entries: Vec<Entry> = j
                .parameters
                .tau
                .into_iter()
                .chain(j.parameters.mu)
                .chain(j.parameters.sigma)
                .collect();
            let names = layout.names();
            if entries.len() != names.len() || entries.iter().zip(&names).any(|(e, n)| e.name != *n)
            {
                return Err(Error::InvalidInput(
                    "report parameters do not match the declared layout".into(),
                ));
            }
            let col = |f: fn(&Entry) -> f64| entries.iter().map(f).collect::<Vec<_>>();
            Ok(SeReport {
                method: j.method,
                estimates: ParamVector {
                    layout,
                    values: col(|e| e.estimate),
                },
                std_errors: col(|e| e.std_error),
                replicate_mean: col(|e| e.replicate_mean),
                ci_lower: col(|e| e.ci_lower),
                ci_upper: col(|e| e.ci_upper),
                k_fitted: j.k_fitted,
                k_total: j.k_total,
                relabelled: j.relabelled,
                elapsed_seconds: j.elapsed_seconds,
            })
        }
    }
}

/// Linear-interpolation quantile (R type 7) of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb `0.9·min(sd, IQR/1.34)·K^(−1/5)`.
///
/// Falls back to whichever spread measure is positive, and for constant
/// input to `10⁻³·max(|x|, 1)` so the estimate stays a proper density.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return 1e-3 * mean.abs().max(1.0),
    };
    0.9 * spread * k.powf(-0.2)
}

/// Gaussian kernel density of `values` on `grid` equally spaced points over
/// `[min − 4h, max + 4h]`.
pub fn kde_curve(values: &[f64], grid: usize) -> Result<Vec<(f64, f64)>> {
    if values.len() < 2 {
        return Err(Error::InsufficientReplicates {
            fitted: values.len(),
        });
    }
    if grid < 2 {
        return Err(Error::InvalidInput(
            "KDE grid needs at least 2 points".into(),
        ));
    }
    let h = silverman_bandwidth(values);
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let (lo, hi) = (min - 4.0 * h, max + 4.0 * h);
    let step = (hi - lo) / (grid - 1) as f64;
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok((0..grid)
        .map(|i| {
            let x = lo + step * i as f64;
            let density = values
                .iter()
                .map(|v| (-0.5 * ((x - v) / h).powi(2)).exp())
                .sum::<f64>()
                * norm;
            (x, density)
        })
        .collect())
}

/// Kernel density of the fitted replicate values of one slot.
pub fn kde_curves(set: &ReplicateSet, slot: usize, grid: usize) -> Result<Vec<(f64, f64)>> {
    if slot >= set.layout.len() {
        return Err(Error::InvalidInput(format!("slot {slot} out of range")));
    }
    let values: Vec<f64> = set.fitted().map(|r| r[slot]).collect();
    kde_curve(&values, grid)
}

/// Trapezoid-rule integral of a curve.
pub fn trapezoid(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn set_1d(method: ReplicateMethod, n: usize, values: &[f64]) -> ReplicateSet {
        let layout = ParamLayout::new(1, 1, CovarianceFamily::SphericalEqual);
        ReplicateSet::from_rows(
            method,
            layout,
            n,
            values.iter().map(|&v| Some(vec![1.0, v, 1.0])).collect(),
        )
    }

    #[test]
    fn layout_sizes() {
        use CovarianceFamily::*;
        assert_eq!(ParamLayout::new(2, 2, FullVarying).len(), 12);
        assert_eq!(ParamLayout::new(3, 2, FullEqual).len(), 12);
        assert_eq!(
            ParamLayout::new(3, 2, FullEqual).names(),
            vec![
                "tau[1]",
                "tau[2]",
                "tau[3]",
                "mu[1][1]",
                "mu[1][2]",
                "mu[2][1]",
                "mu[2][2]",
                "mu[3][1]",
                "mu[3][2]",
                "sigma[1,1]",
                "sigma[1,2]",
                "sigma[2,2]"
            ]
        );
        assert_eq!(
            ParamLayout::new(2, 3, SphericalVarying).names()[8],
            "sigma[1]"
        );
        assert_eq!(ParamLayout::new(2, 3, SphericalEqual).names()[8], "sigma");
    }

    #[test]
    fn slot_lookup_aliases() {
        use CovarianceFamily::*;
        let eee = ParamLayout::new(3, 2, FullEqual);
        assert_eq!(eee.slot_index("sigma[1][1,2]").unwrap(), 10);
        assert_eq!(eee.slot_index("sigma[2,1]").unwrap(), 10);
        assert_eq!(eee.slot_index("mu[3][2]").unwrap(), 8);
        let vvv = ParamLayout::new(2, 2, FullVarying);
        assert_eq!(vvv.slot_index("sigma[2][2,1]").unwrap(), 10);
        assert!(matches!(
            vvv.slot_index("sigma[1,2]"),
            Err(Error::UnknownSlot(_))
        ));
        assert!(matches!(
            vvv.slot_index("tau[3]"),
            Err(Error::UnknownSlot(_))
        ));
        assert!(matches!(
            vvv.slot_index("nu[1]"),
            Err(Error::UnknownSlot(_))
        ));
    }

    #[test]
    fn jk_hand_value() {
        // ψ = (1, 2, 3), n = 3: mean 2, (2/3)·2 = 4/3
        let set = set_1d(ReplicateMethod::Jackknife, 3, &[1.0, 2.0, 3.0]);
        assert_relative_eq!(jk_variance(&set).unwrap()[1], 4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(jk_variance(&set).unwrap()[0], 0.0);
        assert!(bs_variance(&set).is_err());
    }

    #[test]
    fn bs_hand_value() {
        let set = set_1d(ReplicateMethod::Bootstrap, 10, &[1.0, 3.0]);
        assert_relative_eq!(bs_variance(&set).unwrap()[1], 2.0, epsilon = 1e-15);
        let same = set_1d(ReplicateMethod::Wlbs, 10, &[5.0, 5.0, 5.0]);
        assert_eq!(bs_variance(&same).unwrap()[1], 0.0);
    }

    #[test]
    fn not_fitted_rows_are_ignored() {
        let layout = ParamLayout::new(1, 1, CovarianceFamily::SphericalEqual);
        let rows = vec![Some(vec![1.0, 1.0, 1.0]), None, Some(vec![1.0, 3.0, 1.0])];
        let set = ReplicateSet::from_rows(ReplicateMethod::Bootstrap, layout, 10, rows);
        assert_eq!(set.k_fitted(), 2);
        assert_relative_eq!(bs_variance(&set).unwrap()[1], 2.0);
        let one = ReplicateSet::from_rows(
            ReplicateMethod::Bootstrap,
            layout,
            10,
            vec![Some(vec![1.0, 1.0, 1.0]), None],
        );
        assert!(matches!(
            bs_variance(&one),
            Err(Error::InsufficientReplicates { fitted: 1 })
        ));
    }

    #[test]
    fn anticorrelated_weights() {
        let layout = ParamLayout::new(2, 1, CovarianceFamily::SphericalEqual);
        let rows = [0.3, 0.45, 0.38, 0.41]
            .iter()
            .map(|&t| Some(vec![t, 1.0 - t, 0.0, 1.0, 1.0]))
            .collect();
        let set = ReplicateSet::from_rows(ReplicateMethod::Bootstrap, layout, 50, rows);
        let var = bs_variance(&set).unwrap();
        assert_relative_eq!(
            param_covariance(&set, 0, 1).unwrap(),
            -var[0],
            epsilon = 1e-15
        );
        assert_eq!(param_covariance(&set, 0, 0).unwrap(), var[0]);
        assert_relative_eq!(var[0].sqrt(), var[1].sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn interval_arithmetic() {
        let (lo, hi) = confidence_interval(0.38, 0.04);
        assert_relative_eq!(lo, 0.30, epsilon = 1e-12);
        assert_relative_eq!(hi, 0.46, epsilon = 1e-12);
        assert!(interval_contains((lo, hi), 0.4));
        assert_eq!(confidence_interval(0.7, 0.0), (0.7, 0.7));
        // closed boundary: 0.13 ± 2·0.04 has lower endpoint exactly 0.05
        assert!(interval_contains((0.05, 0.21), 0.05));
        assert!(!interval_contains((0.05, 0.21), 0.0499));
    }

    #[test]
    fn kde_symmetric_pair() {
        let curve = kde_curve(&[-1.0, 1.0], 401).unwrap();
        for i in 0..curve.len() {
            let j = curve.len() - 1 - i;
            assert!((curve[i].0 + curve[j].0).abs() < 1e-10);
            assert!((curve[i].1 - curve[j].1).abs() < 1e-10);
        }
        assert!((trapezoid(&curve) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn kde_point_mass() {
        let curve = kde_curve(&[2.5; 20], 512).unwrap();
        assert!((trapezoid(&curve) - 1.0).abs() < 1e-3);
        assert!(curve.iter().all(|&(_, d)| d >= 0.0));
        let peak = curve
            .iter()
            .fold((0.0, 0.0), |a, &b| if b.1 > a.1 { b } else { a });
        assert!((peak.0 - 2.5).abs() < 1e-4);
    }

    #[test]
    fn kde_needs_two_values() {
        assert!(matches!(
            kde_curve(&[1.0], 10),
            Err(Error::InsufficientReplicates { fitted: 1 })
        ));
    }
}
