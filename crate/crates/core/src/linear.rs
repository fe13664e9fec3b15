//! Linear RNC fits and their OLS / null-model baselines.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NetcohError, Result};
use crate::graph::{laplacian, Graph};
use crate::solver::{block_eliminate_fit, RncSystem, SolveReport, SolverOptions};
use crate::standardize::{standardize, Standardization};
use crate::Family;

/// Default ridge for linear fits: the unregularized penalty.
pub const DEFAULT_GAMMA_LINEAR: f64 = 0.0;

/// A fitted linear model. `beta_hat` lives on the standardized scale of
/// `standardization`; use [`fitted_values`] or [`Standardization::unscale`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFit {
    pub family: Family,
    pub alpha_hat: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub report: SolveReport,
    pub standardization: Standardization,
}

fn check_rows(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: y.len(),
            found: x.nrows(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(NetcohError::InvalidInput(
            "response has non-finite values".into(),
        ));
    }
    Ok(())
}

/// Standardizes `x` (no-op shape for `p = 0`).
pub(crate) fn standardize_design(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Standardization)> {
    if x.ncols() == 0 {
        return Ok((x.clone(), Standardization::identity(0)));
    }
    standardize(x)
}

/// Minimizes `||Y - X beta - alpha||^2 + lambda alpha'(L + gamma I)alpha`.
pub fn fit_linear(
    x: &DMatrix<f64>,
    y: &[f64],
    g: &Graph,
    lambda: f64,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<LinearFit> {
    check_rows(x, y)?;
    if g.node_count() != y.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: g.node_count(),
            found: y.len(),
        });
    }
    let (xs, st) = standardize_design(x)?;
    let l = laplacian(g, gamma)?;
    let sys = RncSystem::new(&l, &xs, lambda)?;
    let sol = block_eliminate_fit(&sys, y, opts)?;
    if !sol.report.converged {
        log::warn!(
            "sparse solves did not reach tolerance {} (residual {:.3e})",
            opts.tol,
            sol.report.final_residual
        );
    }
    Ok(LinearFit {
        family: Family::Linear,
        alpha_hat: sol.a1,
        beta_hat: sol.a2,
        lambda,
        gamma,
        report: sol.report,
        standardization: st,
    })
}

/// Ordinary least squares with a common intercept: `alpha_hat = mean(Y) 1`.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearFit> {
    check_rows(x, y)?;
    if y.is_empty() {
        return Err(NetcohError::InvalidInput("no observations".into()));
    }
    let (xs, st) = standardize_design(x)?;
    let n = y.len();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let beta = if xs.ncols() == 0 {
        Vec::new()
    } else {
        let xtx = xs.tr_mul(&xs);
        let scale = xtx.diagonal().max();
        let chol = xtx.cholesky().ok_or_else(|| {
            NetcohError::Singular("X'X is not positive definite (rank-deficient X)".into())
        })?;
        let fl = chol.l_dirty();
        let min_pivot = (0..fl.nrows())
            .map(|i| fl[(i, i)].powi(2))
            .fold(f64::INFINITY, f64::min);
        if min_pivot < 1e-12 * scale {
            return Err(NetcohError::Singular(
                "X'X is numerically singular (rank-deficient X)".into(),
            ));
        }
        chol.solve(&xs.tr_mul(&DVector::from_column_slice(y)))
            .as_slice()
            .to_vec()
    };
    Ok(LinearFit {
        family: Family::Linear,
        alpha_hat: vec![ybar; n],
        beta_hat: beta,
        lambda: 0.0,
        gamma: 0.0,
        report: SolveReport {
            iterations: 0,
            final_residual: 0.0,
            converged: true,
        },
        standardization: st,
    })
}

/// RNC on the empty graph: a pure ridge penalty on the individual effects.
pub fn null_model_fit(
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<LinearFit> {
    fit_linear(x, y, &Graph::empty(y.len()), lambda, gamma, opts)
}

/// `alpha_hat + X beta_hat`, with `x` on the original (unstandardized) scale.
pub fn fitted_values(fit: &LinearFit, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.nrows() != fit.alpha_hat.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: fit.alpha_hat.len(),
            found: x.nrows(),
        });
    }
    linear_predictor(&fit.alpha_hat, &fit.beta_hat, &fit.standardization, x)
}

/// `alpha + standardize(x) beta` for arbitrary rows.
pub fn linear_predictor(
    alpha: &[f64],
    beta: &[f64],
    st: &Standardization,
    x: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    if alpha.len() != x.nrows() {
        return Err(NetcohError::DimensionMismatch {
            expected: x.nrows(),
            found: alpha.len(),
        });
    }
    if beta.len() != st.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: st.len(),
            found: beta.len(),
        });
    }
    let xs = st.apply(x)?;
    let xb = &xs * DVector::from_column_slice(beta);
    Ok(alpha.iter().zip(xb.iter()).map(|(a, b)| a + b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn ols_on_two_points() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let fit = ols_fit(&x, &[1.0, -1.0]).unwrap();
        assert!((fit.beta_hat[0] - 1.0).abs() < 1e-14);
        assert_eq!(fit.alpha_hat, vec![0.0, 0.0]);
    }

    #[test]
    fn ols_on_constant_response() {
        let x = random_design(10, 2, 4);
        let fit = ols_fit(&x, &[3.0; 10]).unwrap();
        assert!(fit.beta_hat.iter().all(|b| b.abs() < 1e-12));
        assert_eq!(fit.alpha_hat, vec![3.0; 10]);
    }

    #[test]
    fn ols_rejects_collinear_columns() {
        let mut x = random_design(10, 2, 5);
        let c: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v).collect();
        x.column_mut(1).copy_from_slice(&c);
        assert!(ols_fit(&x, &[1.0; 10]).is_err());
    }

    #[test]
    fn null_model_alpha_is_shrunken_ols_residual() {
        let x = random_design(25, 2, 6);
        let y: Vec<f64> = (0..25).map(|i| (i as f64).sin()).collect();
        let lambda = 0.8;
        let ols = ols_fit(&x, &y).unwrap();
        let null = null_model_fit(&x, &y, lambda, 1.0, &SolverOptions::default()).unwrap();
        let xs = ols.standardization.apply(&x).unwrap();
        let xb = &xs * DVector::from_column_slice(&ols.beta_hat);
        for i in 0..25 {
            let expect = (y[i] - xb[i]) / (1.0 + lambda);
            assert!((null.alpha_hat[i] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn fitted_values_of_zero_fit() {
        let x = random_design(4, 1, 7);
        let mut fit = ols_fit(&x, &[0.0; 4]).unwrap();
        fit.beta_hat = vec![0.0];
        assert_eq!(fitted_values(&fit, &x).unwrap(), vec![0.0; 4]);
        assert!(fitted_values(&fit, &random_design(3, 1, 1)).is_err());
    }

    #[test]
    fn no_covariates() {
        let g = Graph::from_unweighted(3, [(0, 1), (1, 2)]).unwrap();
        let x = DMatrix::zeros(3, 0);
        let fit = fit_linear(
            &x,
            &[1.0, 2.0, 3.0],
            &g,
            1.0,
            0.0,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(fit.beta_hat.is_empty());
        assert!((fit.alpha_hat.iter().sum::<f64>() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn assumption_violation_is_reported() {
        let x = random_design(12, 2, 8);
        let y = vec![1.0; 12];
        let err = null_model_fit(&x, &y, 1.0, 0.0, &SolverOptions::default()).unwrap_err();
        assert!(err.to_string().contains("set --gamma > 0"));
    }
}
