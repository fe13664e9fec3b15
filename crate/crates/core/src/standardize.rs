//! Column centering and scaling of design matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NetcohError, Result};

/// Per-column means and (population) standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn identity(p: usize) -> Self {
        Self {
            means: vec![0.0; p],
            scales: vec![1.0; p],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Applies the stored transform to new rows.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.len() {
            return Err(NetcohError::DimensionMismatch {
                expected: self.len(),
                found: x.ncols(),
            });
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = (*v - self.means[j]) / self.scales[j];
            }
        }
        Ok(out)
    }

    /// Converts standardized-scale coefficients to the original scale, returning
    /// `(beta, offset)` with `x' beta_std = x_raw' beta - offset`.
    pub fn unscale(&self, beta_std: &[f64]) -> (Vec<f64>, f64) {
        let beta: Vec<f64> = beta_std
            .iter()
            .zip(&self.scales)
            .map(|(b, s)| b / s)
            .collect();
        let offset = beta.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        (beta, offset)
    }
}

/// Centers every column to mean 0 and scales it to population variance 1.
/// Constant columns are rejected.
pub fn standardize(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Standardization)> {
    let n = x.nrows();
    if n == 0 {
        return Err(NetcohError::InvalidInput(
            "design matrix has no rows".into(),
        ));
    }
    let mut means = Vec::with_capacity(x.ncols());
    let mut scales = Vec::with_capacity(x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        if col.iter().any(|v| !v.is_finite()) {
            return Err(NetcohError::InvalidInput(format!(
                "column {j} has non-finite values"
            )));
        }
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if !(var > 1e-24 * (1.0 + mean * mean)) {
            return Err(NetcohError::InvalidInput(format!("column {j} is constant")));
        }
        means.push(mean);
        scales.push(var.sqrt());
    }
    let st = Standardization { means, scales };
    let mut out = st.apply(x)?;
    // A second centering pass removes the rounding left by the first.
    for mut col in out.column_iter_mut() {
        let m = col.sum() / n as f64;
        col.iter_mut().for_each(|v| *v -= m);
    }
    Ok((out, st))
}
