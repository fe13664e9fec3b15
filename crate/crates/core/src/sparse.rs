//! Compressed sparse row storage used for Laplacians and their blocks.

use nalgebra::DMatrix;

use crate::error::{NetcohError, Result};

/// A real matrix in CSR form. Column indices within a row are sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Repeated positions are summed
    /// and explicit zeros are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut acc = 0.0;
                while k < row.len() && row[k].0 == j {
                    acc += row[k].1;
                    k += 1;
                }
                if acc != 0.0 {
                    indices.push(j);
                    values.push(acc);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let start = self.indptr[i];
            let end = self.indptr[i + 1];
            let mut acc = 0.0;
            for k in start..end {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(NetcohError::DimensionMismatch {
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    /// Returns `A + shift * I` (square matrices only).
    pub fn shifted(&self, shift: f64) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let trips = (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .chain((0..self.nrows).map(|i| (i, i, shift)));
        Self::from_triplets(self.nrows, self.ncols, trips)
    }

    /// Returns `scale * A`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= scale);
        out
    }

    /// Checks `A[i,j] == A[j,i]` up to `tol` relative to the largest entry magnitude.
    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        if self.nrows != self.ncols {
            return Err(NetcohError::DimensionMismatch {
                expected: self.nrows,
                found: self.ncols,
            });
        }
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                if (v - self.get(j, i)).abs() > tol * scale.max(1.0) {
                    return Err(NetcohError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    /// Smallest row margin `a_ii - sum_{j != i} |a_ij|`. Positive means strictly
    /// diagonally dominant.
    pub fn dominance_margin(&self) -> f64 {
        (0..self.nrows)
            .map(|i| {
                let mut diag = 0.0;
                let mut off = 0.0;
                for (j, v) in self.row(i) {
                    if j == i {
                        diag = v;
                    } else {
                        off += v.abs();
                    }
                }
                diag - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_summed_and_sorted() {
        let m =
            CsrMatrix::from_triplets(2, 3, [(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, 0.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(1, 1), 0.0);
        let row: Vec<_> = m.row(0).collect();
        assert_eq!(row, vec![(0, 2.0), (2, 1.5)]);
    }

    #[test]
    fn matvec_matches_dense() {
        let m =
            CsrMatrix::from_triplets(3, 3, [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (2, 2, 4.0)]);
        let x = [1.0, 2.0, 3.0];
        let y = m.mul_vec(&x).unwrap();
        let d = m.to_dense() * nalgebra::DVector::from_column_slice(&x);
        assert_eq!(y, d.as_slice());
    }

    #[test]
    fn asymmetry_is_detected() {
        let m = CsrMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 2.0)]);
        assert!(m.check_symmetric(1e-12).is_err());
    }
}
