//! Dense linear algebra for the small symmetric matrices that appear as
//! component covariances. Dimensions here are tiny (p is typically 2 to 10),
//! so everything is row-major `Vec<f64>` with no allocation in the hot paths.

use serde::{Deserialize, Serialize};

/// Square matrix stored row-major. Serializes as nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut m = Self::identity(dim);
        m.scale(scale);
        m
    }

    /// Builds a matrix from nested rows. Panics if the rows are ragged or not square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "matrix rows must form a square");
            data.extend_from_slice(row);
        }
        Self { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.dim.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * v vᵀ`, upper triangle only. Call [`Matrix::mirror_upper`] afterwards.
    #[inline]
    pub fn add_outer_upper(&mut self, v: &[f64], s: f64) {
        let dim = self.dim;
        for i in 0..dim {
            let si = s * v[i];
            let row = &mut self.data[i * dim..(i + 1) * dim];
            for j in i..dim {
                row[j] += si * v[j];
            }
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn mirror_upper(&mut self) {
        for i in 0..self.dim {
            for j in 0..i {
                self.data[i * self.dim + j] = self.data[j * self.dim + i];
            }
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = String;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, String> {
        if rows.iter().any(|r| r.len() != rows.len()) {
            return Err(format!("matrix with {} rows is not square", rows.len()));
        }
        Ok(Matrix::from_rows(&rows))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factorizes `a`. Returns `None` when `a` is not numerically positive
    /// definite: a non-positive pivot, or a squared pivot ratio
    /// `min(L_ii)² / max(L_ii)²` below `min_rcond`.
    pub fn new(a: &Matrix, min_rcond: f64) -> Option<Self> {
        let dim = a.dim();
        let mut lower = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut sum = a[(i, j)];
                for k in 0..j {
                    sum -= lower[i * dim + k] * lower[j * dim + k];
                }
                if i == j {
                    if !sum.is_finite() || sum <= 0.0 {
                        return None;
                    }
                    lower[i * dim + i] = sum.sqrt();
                } else {
                    lower[i * dim + j] = sum / lower[j * dim + j];
                }
            }
        }
        let chol = Self { dim, lower };
        let (lo, hi) = (0..dim)
            .map(|i| chol.lower[i * dim + i])
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            });
        if dim > 0 && (lo * lo) < min_rcond * (hi * hi) {
            return None;
        }
        Some(chol)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// log det A = 2 Σ log L_ii
    pub fn log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Squared Mahalanobis distance `(x - mean)ᵀ A⁻¹ (x - mean)` by forward
    /// substitution. `scratch` must hold at least `dim` values.
    #[inline]
    pub fn mahalanobis_sq(&self, x: &[f64], mean: &[f64], scratch: &mut [f64]) -> f64 {
        let dim = self.dim;
        let mut total = 0.0;
        for i in 0..dim {
            let row = &self.lower[i * dim..i * dim + i];
            let mut v = x[i] - mean[i];
            for (l, y) in row.iter().zip(scratch.iter()) {
                v -= l * y;
            }
            let y = v / self.lower[i * dim + i];
            scratch[i] = y;
            total += y * y;
        }
        total
    }

    /// `L z`, used to turn standard normal draws into correlated ones.
    pub fn mul_lower(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (0..=i).map(|k| self.lower[i * self.dim + k] * z[k]).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factor_reconstructs_matrix() {
        let a = Matrix::from_rows(&[
            vec![4.0, 2.0, 0.6],
            vec![2.0, 2.0, 0.5],
            vec![0.6, 0.5, 3.0],
        ]);
        let c = Cholesky::new(&a, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3)
                    .map(|k| c.lower[i * 3 + k] * c.lower[j * 3 + k])
                    .sum();
                assert_relative_eq!(v, a[(i, j)], epsilon = 1e-12);
            }
        }
        // det by cofactor expansion
        let det: f64 = 4.0 * (2.0 * 3.0 - 0.25) - 2.0 * (2.0 * 3.0 - 0.5 * 0.6)
            + 0.6 * (2.0 * 0.5 - 2.0 * 0.6);
        assert_relative_eq!(c.log_det(), det.ln(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_ill_conditioned() {
        let indefinite = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(Cholesky::new(&indefinite, 0.0).is_none());
        let singular = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-14]]);
        assert!(Cholesky::new(&singular, 1e-10).is_none());
    }

    #[test]
    fn mahalanobis_matches_diagonal_case() {
        let a = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 0.25]]);
        let c = Cholesky::new(&a, 0.0).unwrap();
        let mut scratch = [0.0; 2];
        let d = c.mahalanobis_sq(&[2.0, 1.0], &[0.0, 0.0], &mut scratch);
        assert_relative_eq!(d, 1.0 + 4.0, epsilon = 1e-14);
    }
}
