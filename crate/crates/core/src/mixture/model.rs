use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};

/// Constraint on the component covariance matrices. Serialized under the
/// usual three-letter mclust identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CovarianceFamily {
    /// `Σ_g = σ² I` (EII)
    #[serde(rename = "EII")]
    SphericalEqual,
    /// `Σ_g = σ_g² I` (VII)
    #[serde(rename = "VII")]
    SphericalVarying,
    /// `Σ_g = Σ` (EEE)
    #[serde(rename = "EEE")]
    FullEqual,
    /// unconstrained `Σ_g` (VVV)
    #[serde(rename = "VVV")]
    FullVarying,
}

impl CovarianceFamily {
    pub const ALL: [CovarianceFamily; 4] = [
        CovarianceFamily::SphericalEqual,
        CovarianceFamily::SphericalVarying,
        CovarianceFamily::FullEqual,
        CovarianceFamily::FullVarying,
    ];

    pub fn code(self) -> &'static str {
        match self {
            CovarianceFamily::SphericalEqual => "EII",
            CovarianceFamily::SphericalVarying => "VII",
            CovarianceFamily::FullEqual => "EEE",
            CovarianceFamily::FullVarying => "VVV",
        }
    }

    /// Free covariance parameters for `g` components in `p` dimensions.
    pub fn covariance_params(self, g: usize, p: usize) -> usize {
        let full = p * (p + 1) / 2;
        match self {
            CovarianceFamily::SphericalEqual => 1,
            CovarianceFamily::SphericalVarying => g,
            CovarianceFamily::FullEqual => full,
            CovarianceFamily::FullVarying => g * full,
        }
    }

    /// `(G − 1) + G·p + covariance parameters`, the BIC penalty count.
    pub fn free_params(self, g: usize, p: usize) -> usize {
        (g - 1) + g * p + self.covariance_params(g, p)
    }

    pub fn is_shared(self) -> bool {
        matches!(
            self,
            CovarianceFamily::SphericalEqual | CovarianceFamily::FullEqual
        )
    }

    pub fn is_spherical(self) -> bool {
        matches!(
            self,
            CovarianceFamily::SphericalEqual | CovarianceFamily::SphericalVarying
        )
    }
}

impl fmt::Display for CovarianceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for CovarianceFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eii" | "sphericalequal" => Ok(CovarianceFamily::SphericalEqual),
            "vii" | "sphericalvarying" => Ok(CovarianceFamily::SphericalVarying),
            "eee" | "fullequal" => Ok(CovarianceFamily::FullEqual),
            "vvv" | "fullvarying" => Ok(CovarianceFamily::FullVarying),
            other => Err(Error::InvalidInput(format!(
                "unknown covariance family `{other}`"
            ))),
        }
    }
}

/// Finite Gaussian mixture: weights `τ_g`, means `μ_g`, covariances `Σ_g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub family: CovarianceFamily,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Matrix>,
}

impl MixtureModel {
    pub fn g(&self) -> usize {
        self.weights.len()
    }

    pub fn p(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Checks the structural invariants: weight simplex, symmetric positive
    /// definite covariances, and shared covariances for the equal families.
    pub fn validate(&self) -> Result<()> {
        let g = self.g();
        let p = self.p();
        if g == 0 || p == 0 {
            return Err(Error::InvalidInput("empty mixture".into()));
        }
        if self.means.len() != g || self.covariances.len() != g {
            return Err(Error::DimensionMismatch {
                expected: g,
                found: self.means.len().min(self.covariances.len()),
            });
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}")));
        }
        if self.weights.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return Err(Error::InvalidInput("weights must lie in (0, 1]".into()));
        }
        for (k, (mean, cov)) in self.means.iter().zip(&self.covariances).enumerate() {
            if mean.len() != p || cov.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: mean.len().min(cov.dim()),
                });
            }
            if cov.max_asymmetry() > 1e-10 || Cholesky::new(cov, 0.0).is_none() {
                return Err(Error::DegenerateCovariance { component: k });
            }
        }
        if self.family.is_shared() && self.covariances.iter().any(|c| c != &self.covariances[0]) {
            return Err(Error::InvalidInput(
                "equal-covariance family with differing covariances".into(),
            ));
        }
        Ok(())
    }

    /// Mixing-weighted average covariance `Σ_k τ_k Σ_k`.
    pub fn pooled_covariance(&self) -> Matrix {
        let mut out = Matrix::zeros(self.p());
        for (w, cov) in self.weights.iter().zip(&self.covariances) {
            let mut c = cov.clone();
            c.scale(*w);
            out.add_assign(&c);
        }
        out
    }

    /// Relabels components so that new component `k` is old component `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            family: self.family,
            weights: perm.iter().map(|&k| self.weights[k]).collect(),
            means: perm.iter().map(|&k| self.means[k].clone()).collect(),
            covariances: perm.iter().map(|&k| self.covariances[k].clone()).collect(),
        }
    }
}

/// `n × G` posterior membership probabilities, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsibilityMatrix {
    z: Vec<f64>,
    n: usize,
    g: usize,
}

impl ResponsibilityMatrix {
    pub fn new(z: Vec<f64>, n: usize, g: usize) -> Result<Self> {
        if z.len() != n * g {
            return Err(Error::DimensionMismatch {
                expected: n * g,
                found: z.len(),
            });
        }
        let m = Self { z, n, g };
        for i in 0..n {
            let row = m.row(i);
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-10 || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidInput(format!(
                    "responsibility row {i} is not a probability vector"
                )));
            }
        }
        Ok(m)
    }

    pub(crate) fn zeros(n: usize, g: usize) -> Self {
        Self {
            z: vec![0.0; n * g],
            n,
            g,
        }
    }

    /// Hard 0/1 assignment. Labels must be `< g`.
    pub fn from_labels(labels: &[usize], g: usize) -> Self {
        let n = labels.len();
        let mut z = vec![0.0; n * g];
        for (i, &l) in labels.iter().enumerate() {
            assert!(l < g, "label {l} out of range for {g} components");
            z[i * g + l] = 1.0;
        }
        Self { z, n, g }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> usize {
        self.g
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.g..(i + 1) * self.g]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.z[i * self.g..(i + 1) * self.g]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn gather(&self, indices: &[usize]) -> Self {
        let mut z = Vec::with_capacity(indices.len() * self.g);
        for &i in indices {
            z.extend_from_slice(self.row(i));
        }
        Self {
            z,
            n: indices.len(),
            g: self.g,
        }
    }

    pub fn without_row(&self, j: usize) -> Self {
        let mut z = self.z.clone();
        z.drain(j * self.g..(j + 1) * self.g);
        Self {
            z,
            n: self.n - 1,
            g: self.g,
        }
    }

    /// Column permutation matching [`MixtureModel::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut z = Vec::with_capacity(self.z.len());
        for i in 0..self.n {
            let row = self.row(i);
            z.extend(perm.iter().map(|&k| row[k]));
        }
        Self {
            z,
            n: self.n,
            g: self.g,
        }
    }

    /// Index of the largest entry per row.
    pub fn map_labels(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                (0..self.g).fold(0, |best, k| if row[k] > row[best] { k } else { best })
            })
            .collect()
    }
}

/// Nonnegative observation weights, normalized to sum to `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn ones(n: usize) -> Self {
        Self { w: vec![1.0; n] }
    }

    /// Validates weights that are already normalized.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = w.iter().sum();
        if (total - w.len() as f64).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, expected {}",
                w.len()
            )));
        }
        Ok(Self { w })
    }

    /// Rescales arbitrary nonnegative weights to mean one.
    pub fn normalized(mut w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::InvalidInput(
                "weights must have positive finite sum".into(),
            ));
        }
        let n = w.len() as f64;
        w.iter_mut().for_each(|v| *v = *v * n / total);
        Self::new(w)
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn is_unit(&self) -> bool {
        self.w.iter().all(|&v| v == 1.0)
    }
}
