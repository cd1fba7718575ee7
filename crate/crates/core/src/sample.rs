use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};

/// An `n × m` block of observations stored row-major, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    data: Vec<f64>,
    n: usize,
    m: usize,
}

impl Sample {
    /// Wrap row-major data. Requires `m ≥ 1`, `n ≥ 1` and finite entries.
    ///
    /// The statistical routines impose their own (larger) minimum sizes.
    pub fn from_rows(data: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(GofError::InvalidParameter("dimension must be at least 1".into()));
        }
        if n == 0 {
            return Err(GofError::TooFewObservations { needed: 1, got: 0 });
        }
        if data.len() != n * m {
            return Err(GofError::DimensionMismatch {
                expected: n * m,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(GofError::NonFinite(format!(
                "entry ({}, {})",
                pos / m,
                pos % m
            )));
        }
        Ok(Self { data, n, m })
    }

    /// Build from a list of equally long rows.
    pub fn from_vecs(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * m);
        for row in rows {
            if row.len() != m {
                return Err(GofError::DimensionMismatch {
                    expected: m,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_rows(data, rows.len(), m)
    }

    pub(crate) fn from_rows_unchecked(data: Vec<f64>, n: usize, m: usize) -> Self {
        debug_assert_eq!(data.len(), n * m);
        Self { data, n, m }
    }

    pub fn from_matrix(x: &DMatrix<f64>) -> Result<Self> {
        let (n, m) = x.shape();
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            data.extend(x.row(i).iter());
        }
        Self::from_rows(data, n, m)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.m, &self.data)
    }

    pub fn column_means(&self) -> DVector<f64> {
        let mut mean = DVector::zeros(self.m);
        for row in self.rows() {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        mean / self.n as f64
    }

    /// Apply `x ↦ x·A + b` to every row (A is `m × k`).
    pub fn affine(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Sample> {
        if a.nrows() != self.m {
            return Err(GofError::DimensionMismatch {
                expected: self.m,
                found: a.nrows(),
            });
        }
        if b.len() != a.ncols() {
            return Err(GofError::DimensionMismatch {
                expected: a.ncols(),
                found: b.len(),
            });
        }
        let mut out = self.to_matrix() * a;
        for mut row in out.row_iter_mut() {
            for (v, s) in row.iter_mut().zip(b.iter()) {
                *v += s;
            }
        }
        Sample::from_matrix(&out)
    }

    /// Stack two samples of the same dimension, `self` first.
    pub fn stack(&self, other: &Sample) -> Result<Sample> {
        if self.m != other.m {
            return Err(GofError::DimensionMismatch {
                expected: self.m,
                found: other.m,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Sample::from_rows_unchecked(data, self.n + other.n, self.m))
    }
}
