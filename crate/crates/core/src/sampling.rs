//! Sparse row/column selectors.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// A `t × n` selector `S` with one nonzero per row: row `a` has weight
/// `weights[a]` in column `indices[a]`. `S·M` picks and scales rows of `M`,
/// `M·Sᵀ` picks and scales columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMatrix {
    source_dim: usize,
    indices: Vec<usize>,
    weights: Vec<f64>,
    expected_size: f64,
}

impl SamplingMatrix {
    pub fn new(source_dim: usize, indices: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if indices.len() != weights.len() {
            return Err(Error::invalid("indices and weights differ in length"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= source_dim) {
            return Err(Error::invalid(format!(
                "sample index {bad} out of range for dimension {source_dim}"
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("non-finite sampling weight"));
        }
        let expected_size = indices.len() as f64;
        Ok(SamplingMatrix {
            source_dim,
            indices,
            weights,
            expected_size,
        })
    }

    pub fn identity(n: usize) -> Self {
        SamplingMatrix {
            source_dim: n,
            indices: (0..n).collect(),
            weights: vec![1.0; n],
            expected_size: n as f64,
        }
    }

    pub(crate) fn with_expected_size(mut self, expected: f64) -> Self {
        self.expected_size = expected;
        self
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Expected number of draws under the sampling distribution.
    pub fn expected_size(&self) -> f64 {
        self.expected_size
    }

    /// Merges repeated indices into one row of weight `√Σw²`, sorted by
    /// index. `SᵀS` is unchanged, so every sketched cost `‖S·M‖` is too.
    pub fn dedup(&self) -> SamplingMatrix {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&a| self.indices[a]);
        let mut indices: Vec<usize> = Vec::with_capacity(self.len());
        let mut sq: Vec<f64> = Vec::with_capacity(self.len());
        for a in order {
            let (i, w) = (self.indices[a], self.weights[a]);
            if indices.last() == Some(&i) {
                *sq.last_mut().expect("nonempty") += w * w;
            } else {
                indices.push(i);
                sq.push(w * w);
            }
        }
        SamplingMatrix {
            source_dim: self.source_dim,
            indices,
            weights: sq.into_iter().map(f64::sqrt).collect(),
            expected_size: self.expected_size,
        }
    }

    /// `S·M`: selected rows of `m`, scaled.
    pub fn select_rows(&self, m: &DenseMatrix) -> DenseMatrix {
        assert_eq!(m.nrows(), self.source_dim, "row dimension mismatch");
        let mut out = DenseMatrix::zeros(self.len(), m.ncols());
        for (a, (&i, &w)) in self.indices.iter().zip(&self.weights).enumerate() {
            out.set_row(a, &(m.row(i) * w));
        }
        out
    }

    /// `M·Sᵀ`: selected columns of `m`, scaled.
    pub fn select_cols(&self, m: &DenseMatrix) -> DenseMatrix {
        assert_eq!(m.ncols(), self.source_dim, "column dimension mismatch");
        let mut out = DenseMatrix::zeros(m.nrows(), self.len());
        for (a, (&i, &w)) in self.indices.iter().zip(&self.weights).enumerate() {
            out.set_column(a, &(m.column(i) * w));
        }
        out
    }

    /// Dense `t × n` form of `S`.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut s = DenseMatrix::zeros(self.len(), self.source_dim);
        for (a, (&i, &w)) in self.indices.iter().zip(&self.weights).enumerate() {
            s[(a, i)] = w;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_preserves_gram() {
        let s = SamplingMatrix::new(5, vec![3, 1, 3, 0], vec![0.5, 2.0, 1.5, 1.0]).unwrap();
        let d = s.dedup();
        assert_eq!(d.indices(), &[0, 1, 3]);
        let g1 = s.to_dense().transpose() * s.to_dense();
        let g2 = d.to_dense().transpose() * d.to_dense();
        assert!((g1 - g2).amax() < 1e-12);
    }

    #[test]
    fn select_matches_dense_product() {
        let m = DenseMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64);
        let s = SamplingMatrix::new(4, vec![2, 0], vec![3.0, -1.0]).unwrap();
        assert_eq!(s.select_rows(&m), s.to_dense() * &m);
        assert_eq!(s.select_cols(&m), &m * s.to_dense().transpose());
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(SamplingMatrix::new(2, vec![2], vec![1.0]).is_err());
        assert!(SamplingMatrix::new(2, vec![1], vec![]).is_err());
    }
}
