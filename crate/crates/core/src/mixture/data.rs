use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n × p` matrix of observations, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    p: usize,
}

impl DataMatrix {
    /// Wraps row-major `values`. Rejects empty shapes and non-finite entries.
    pub fn new(values: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "data must have at least one row and column, got {n}×{p}"
            )));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        Ok(Self { values, n, p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        Self::new(rows.concat(), rows.len(), p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// New matrix made of the given rows, in order, repeats allowed.
    pub fn gather(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            values,
            n: indices.len(),
            p: self.p,
        }
    }

    /// Copy with row `j` removed.
    pub fn without_row(&self, j: usize) -> Self {
        let mut values = Vec::with_capacity((self.n - 1) * self.p);
        values.extend_from_slice(&self.values[..j * self.p]);
        values.extend_from_slice(&self.values[(j + 1) * self.p..]);
        Self {
            values,
            n: self.n - 1,
            p: self.p,
        }
    }

    /// Copy keeping only the listed columns.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.p) {
            return Err(Error::InvalidInput(format!(
                "column {c} out of range for {} columns",
                self.p
            )));
        }
        let values = self
            .rows()
            .flat_map(|r| columns.iter().map(move |&c| r[c]))
            .collect();
        Self::new(values, self.n, columns.len())
    }

    /// Copy with `shift` added to every row.
    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.p);
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v + shift[k % self.p])
            .collect();
        Self {
            values,
            n: self.n,
            p: self.p,
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.p];
        for r in self.rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= self.n as f64);
        means
    }
}
