//! Finite-sample theory of the linear RNC estimator, evaluated densely:
//! existence (`nu`), exact bias and MSE, the MSE upper bounds, the comparison
//! with OLS and the error bound for sparsified Laplacians.
//!
//! MSE values are totals over coordinates (`E||a_hat - a||^2`), not averages.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{NetcohError, Result};
use crate::graph::Laplacian;
use crate::solver::{rnc_system_matrix, MAX_DENSE};

fn guard(n: usize) -> Result<()> {
    if n > MAX_DENSE {
        return Err(NetcohError::TooLarge {
            size: n,
            limit: MAX_DENSE,
        });
    }
    Ok(())
}

fn check(x: &DMatrix<f64>, l: &Laplacian, alpha: &[f64], beta: &[f64]) -> Result<()> {
    if x.nrows() != l.dim() || alpha.len() != l.dim() {
        return Err(NetcohError::DimensionMismatch {
            expected: l.dim(),
            found: if x.nrows() != l.dim() {
                x.nrows()
            } else {
                alpha.len()
            },
        });
    }
    if beta.len() != x.ncols() {
        return Err(NetcohError::DimensionMismatch {
            expected: x.ncols(),
            found: beta.len(),
        });
    }
    Ok(())
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

/// `(X'X)^-1`, rejecting rank-deficient designs.
fn xtx_inverse(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let xtx = x.tr_mul(x);
    let scale = xtx.diagonal().max();
    let chol = xtx.cholesky().ok_or_else(|| {
        NetcohError::Singular("X'X is not positive definite (rank-deficient X)".into())
    })?;
    let fl = chol.l_dirty();
    if (0..fl.nrows()).any(|i| fl[(i, i)].powi(2) < 1e-12 * scale) {
        return Err(NetcohError::Singular(
            "X'X is numerically singular (rank-deficient X)".into(),
        ));
    }
    Ok(chol.inverse())
}

/// Projection onto the orthogonal complement of `col(X)`.
pub fn orthogonal_projector(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let mut p = DMatrix::identity(n, n);
    if x.ncols() > 0 {
        p -= x * xtx_inverse(x)? * x.transpose();
    }
    Ok(p)
}

/// `nu = lambda_min(P_Xperp + lambda L)`. Positive `nu` certifies that the
/// estimator exists. Rounding below zero is clamped to 0.
pub fn assumption_nu(x: &DMatrix<f64>, l: &Laplacian, lambda: f64) -> Result<f64> {
    guard(l.dim())?;
    if x.nrows() != l.dim() {
        return Err(NetcohError::DimensionMismatch {
            expected: l.dim(),
            found: x.nrows(),
        });
    }
    let m = orthogonal_projector(x)? + l.to_dense() * lambda;
    let nu = min_eigenvalue(m);
    // Eigen-solver noise around an exact zero.
    Ok(if nu.abs() < 1e-10 { 0.0 } else { nu.max(0.0) })
}

/// `lambda_min(X'X)`.
pub fn assumption_mu(x: &DMatrix<f64>) -> f64 {
    if x.ncols() == 0 {
        return f64::INFINITY;
    }
    min_eigenvalue(x.tr_mul(x))
}

/// `V(alpha) = sum_v (alpha_v - mean)^2`.
pub fn centered_sum_of_squares(alpha: &[f64]) -> f64 {
    let m = alpha.iter().sum::<f64>() / alpha.len().max(1) as f64;
    alpha.iter().map(|a| (a - m).powi(2)).sum()
}

fn l_alpha(l: &Laplacian, alpha: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; alpha.len()];
    l.apply_into(alpha, &mut out);
    out
}

/// Dense pieces shared by the exact-error evaluators.
struct Dense {
    n: usize,
    p: usize,
    ainv: DMatrix<f64>,
    xt: DMatrix<f64>,
}

impl Dense {
    fn new(x: &DMatrix<f64>, l: &Laplacian, lambda: f64) -> Result<Self> {
        let n = l.dim();
        let p = x.ncols();
        let a = rnc_system_matrix(l, x, lambda)?;
        let scale = a.diagonal().max();
        let chol = a.cholesky().ok_or_else(|| {
            NetcohError::EstimatorDoesNotExist("the RNC system matrix is singular".into())
        })?;
        let fl = chol.l_dirty();
        if (0..fl.nrows()).any(|i| fl[(i, i)].powi(2) < 1e-12 * scale) {
            return Err(NetcohError::EstimatorDoesNotExist(
                "the RNC system matrix is singular".into(),
            ));
        }
        let mut xt = DMatrix::zeros(n, n + p);
        xt.view_mut((0, 0), (n, n)).fill_with_identity();
        xt.view_mut((0, n), (n, p)).copy_from(x);
        Ok(Self {
            n,
            p,
            ainv: chol.inverse(),
            xt,
        })
    }

    fn bias(&self, lambda: f64, l_alpha: &[f64]) -> DVector<f64> {
        let mut m_theta = DVector::zeros(self.n + self.p);
        m_theta.rows_mut(0, self.n).copy_from_slice(l_alpha);
        &self.ainv * m_theta * (-lambda)
    }

    /// `S = X~ A^-1 X~'`.
    fn shrinkage(&self) -> DMatrix<f64> {
        &self.xt * (&self.ainv * self.xt.transpose())
    }
}

/// Exact bias of `(alpha_hat, beta_hat)` in two algebraic forms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasReport {
    /// `-lambda (X~'X~ + lambda M)^-1 M theta`, length `n + p`.
    pub bias: Vec<f64>,
    /// `-(P_Xperp / lambda + L)^-1 L alpha`.
    pub bias_alpha: Vec<f64>,
    /// `-(X'X)^-1 X' bias_alpha`.
    pub bias_beta: Vec<f64>,
    /// Largest absolute difference between the two forms.
    pub form_gap: f64,
}

pub fn rnc_bias(
    x: &DMatrix<f64>,
    l: &Laplacian,
    lambda: f64,
    alpha: &[f64],
    beta: &[f64],
) -> Result<BiasReport> {
    check(x, l, alpha, beta)?;
    guard(l.dim() + x.ncols())?;
    let d = Dense::new(x, l, lambda)?;
    let la = l_alpha(l, alpha);
    let bias = d.bias(lambda, &la);

    let m = orthogonal_projector(x)? / lambda + l.to_dense();
    let ba = m
        .lu()
        .solve(&DVector::from_column_slice(&la))
        .ok_or_else(|| {
            NetcohError::EstimatorDoesNotExist("P_Xperp / lambda + L is singular".into())
        })?
        * -1.0;
    let bb = if x.ncols() > 0 {
        -(xtx_inverse(x)? * x.tr_mul(&ba))
    } else {
        DVector::zeros(0)
    };
    let n = l.dim();
    let gap = (0..n)
        .map(|i| (bias[i] - ba[i]).abs())
        .chain((0..x.ncols()).map(|j| (bias[n + j] - bb[j]).abs()))
        .fold(0.0, f64::max);
    if gap > 1e-6 * (1.0 + bias.amax()) {
        log::warn!("bias forms disagree by {gap:.3e}");
    }
    Ok(BiasReport {
        bias: bias.as_slice().to_vec(),
        bias_alpha: ba.as_slice().to_vec(),
        bias_beta: bb.as_slice().to_vec(),
        form_gap: gap,
    })
}

/// Total mean squared errors of an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMse {
    pub mse_alpha: f64,
    pub mse_beta: f64,
    /// `E||Y_hat - E Y||^2`.
    pub mspe: f64,
}

/// Exact MSEs of the RNC estimator: squared bias plus the trace of
/// `sigma^2 A^-1 X~'X~ A^-1` with `A = X~'X~ + lambda M`.
pub fn rnc_exact_mse(
    x: &DMatrix<f64>,
    l: &Laplacian,
    lambda: f64,
    alpha: &[f64],
    beta: &[f64],
    sigma2: f64,
) -> Result<ExactMse> {
    check(x, l, alpha, beta)?;
    guard(l.dim() + x.ncols())?;
    let d = Dense::new(x, l, lambda)?;
    let (n, p) = (d.n, d.p);
    let bias = d.bias(lambda, &l_alpha(l, alpha));
    let g = d.xt.tr_mul(&d.xt);
    let var = &d.ainv * g * &d.ainv * sigma2;
    let s = d.shrinkage();
    let xb = &d.xt * &bias;
    Ok(ExactMse {
        mse_alpha: bias.rows(0, n).norm_squared() + (0..n).map(|i| var[(i, i)]).sum::<f64>(),
        mse_beta: bias.rows(n, p).norm_squared() + (n..n + p).map(|i| var[(i, i)]).sum::<f64>(),
        mspe: xb.norm_squared() + sigma2 * s.norm_squared(),
    })
}

/// Exact MSEs of OLS with a common intercept (`alpha_hat = mean(Y) 1`).
pub fn ols_exact_mse(x: &DMatrix<f64>, alpha: &[f64], sigma2: f64) -> Result<ExactMse> {
    let n = x.nrows();
    if alpha.len() != n {
        return Err(NetcohError::DimensionMismatch {
            expected: n,
            found: alpha.len(),
        });
    }
    guard(n)?;
    let p = x.ncols();
    let a = DVector::from_column_slice(alpha);
    let (beta_bias_sq, trace_inv, proj_alpha) = if p > 0 {
        let inv = xtx_inverse(x)?;
        let b = &inv * x.tr_mul(&a);
        (b.norm_squared(), inv.trace(), x * b)
    } else {
        (0.0, 0.0, DVector::zeros(n))
    };
    let mean = a.sum() / n as f64;
    // (I - P) alpha with P = 11'/n + X(X'X)^-1 X'.
    let resid = a.map(|v| v - mean) - proj_alpha;
    Ok(ExactMse {
        mse_alpha: centered_sum_of_squares(alpha) + sigma2,
        mse_beta: beta_bias_sq + sigma2 * trace_inv,
        mspe: resid.norm_squared() + sigma2 * (p as f64 + 1.0),
    })
}

/// Right-hand sides of the three MSE upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Bounds {
    pub alpha: f64,
    pub beta: f64,
    pub prediction: f64,
}

/// Verdicts of the two sufficient conditions for RNC to beat OLS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsComparison {
    pub alpha_rnc_favored: bool,
    pub beta_rnc_favored: bool,
    /// Largest sigma for which the alpha condition holds (0 if none).
    pub alpha_sigma_threshold: f64,
    /// Largest sigma for which the beta condition holds (0 if none).
    pub beta_sigma_threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryReport {
    pub n: usize,
    pub p: usize,
    pub lambda: f64,
    pub sigma2: f64,
    pub nu: f64,
    pub mu: f64,
    pub l_alpha_sq: f64,
    pub v_alpha: f64,
    /// `||(X'X)^-1 X' alpha||^2`.
    pub ols_beta_bias_sq: f64,
    /// `tr((X'X)^-1)`.
    pub trace_xtx_inv: f64,
    pub shrinkage_frob: f64,
    pub bounds: Theorem1Bounds,
    pub comparisons: OlsComparison,
    pub exact_rnc: ExactMse,
    pub exact_ols: ExactMse,
}

/// Evaluates every quantity of the report for the true `(alpha, beta)`.
pub fn theory_report(
    x: &DMatrix<f64>,
    l: &Laplacian,
    lambda: f64,
    alpha: &[f64],
    beta: &[f64],
    sigma2: f64,
) -> Result<TheoryReport> {
    check(x, l, alpha, beta)?;
    let nu = assumption_nu(x, l, lambda)?;
    let mu = assumption_mu(x);
    let la = l_alpha(l, alpha);
    let (ols_beta_bias_sq, trace_xtx_inv) = if x.ncols() > 0 {
        let inv = xtx_inverse(x)?;
        let b = &inv * x.tr_mul(&DVector::from_column_slice(alpha));
        (b.norm_squared(), inv.trace())
    } else {
        (0.0, 0.0)
    };
    let shrinkage_frob = shrinkage_frobenius(x, l, lambda)?;
    let mut report = TheoryReport {
        n: l.dim(),
        p: x.ncols(),
        lambda,
        sigma2,
        nu,
        mu,
        l_alpha_sq: la.iter().map(|v| v * v).sum(),
        v_alpha: centered_sum_of_squares(alpha),
        ols_beta_bias_sq,
        trace_xtx_inv,
        shrinkage_frob,
        bounds: Theorem1Bounds {
            alpha: 0.0,
            beta: 0.0,
            prediction: 0.0,
        },
        comparisons: OlsComparison {
            alpha_rnc_favored: false,
            beta_rnc_favored: false,
            alpha_sigma_threshold: 0.0,
            beta_sigma_threshold: 0.0,
        },
        exact_rnc: rnc_exact_mse(x, l, lambda, alpha, beta, sigma2)?,
        exact_ols: ols_exact_mse(x, alpha, sigma2)?,
    };
    report.bounds = bounds_from(&report)?;
    report.comparisons = ols_comparison(&report, sigma2, report.n);
    Ok(report)
}

/// `||S_lambda||_F` with `S_lambda = X~(X~'X~ + lambda M)^-1 X~'`.
pub fn shrinkage_frobenius(x: &DMatrix<f64>, l: &Laplacian, lambda: f64) -> Result<f64> {
    guard(l.dim() + x.ncols())?;
    Ok(Dense::new(x, l, lambda)?.shrinkage().norm())
}

fn bounds_from(r: &TheoryReport) -> Result<Theorem1Bounds> {
    if !(r.nu > 0.0) {
        return Err(NetcohError::EstimatorDoesNotExist(
            "nu = 0, so the MSE bounds are undefined".into(),
        ));
    }
    let (lam, nu, s2) = (r.lambda, r.nu, r.sigma2);
    let beta = if r.p == 0 {
        0.0
    } else {
        lam * lam / (nu * nu * r.mu) * r.l_alpha_sq + s2 * (1.0 / nu + 1.0) * r.trace_xtx_inv
    };
    Ok(Theorem1Bounds {
        alpha: lam * lam / (nu * nu) * r.l_alpha_sq + r.n as f64 * s2 / nu,
        beta,
        prediction: lam * lam / nu * r.l_alpha_sq + s2 * r.shrinkage_frob.powi(2),
    })
}

/// The three MSE upper bounds for the true `(alpha, beta)`.
pub fn theorem1_bounds(
    x: &DMatrix<f64>,
    l: &Laplacian,
    lambda: f64,
    alpha: &[f64],
    beta: &[f64],
    sigma2: f64,
) -> Result<Theorem1Bounds> {
    theory_report(x, l, lambda, alpha, beta, sigma2).map(|r| r.bounds)
}

/// Largest sigma with `(n/nu - 1) sigma^2 <= V(alpha) - lambda^2/nu^2 ||L alpha||^2`.
pub fn alpha_sigma_threshold(n: usize, nu: f64, lambda: f64, l_alpha_sq: f64, v_alpha: f64) -> f64 {
    let rhs = v_alpha - lambda * lambda / (nu * nu) * l_alpha_sq;
    let lhs = n as f64 / nu - 1.0;
    if rhs <= 0.0 || lhs <= 0.0 {
        0.0
    } else {
        (rhs / lhs).sqrt()
    }
}

/// Largest sigma with
/// `tr((X'X)^-1) sigma^2 / nu <= ||(X'X)^-1 X' alpha||^2 - lambda^2/mu ||L alpha||^2`.
pub fn beta_sigma_threshold(
    trace_inv: f64,
    nu: f64,
    mu: f64,
    lambda: f64,
    l_alpha_sq: f64,
    ols_bias_sq: f64,
) -> f64 {
    let rhs = ols_bias_sq - lambda * lambda / mu * l_alpha_sq;
    if rhs <= 0.0 || trace_inv <= 0.0 {
        0.0
    } else {
        (rhs * nu / trace_inv).sqrt()
    }
}

/// Evaluates both OLS-comparison inequalities at noise variance `sigma2`.
pub fn ols_comparison(r: &TheoryReport, sigma2: f64, n: usize) -> OlsComparison {
    let nu = r.nu;
    let alpha_ok = nu > 0.0
        && (n as f64 / nu - 1.0) * sigma2
            <= r.v_alpha - r.lambda.powi(2) / nu.powi(2) * r.l_alpha_sq;
    let beta_ok = nu > 0.0
        && r.p > 0
        && r.trace_xtx_inv * sigma2 / nu
            <= r.ols_beta_bias_sq - r.lambda.powi(2) / r.mu * r.l_alpha_sq;
    OlsComparison {
        alpha_rnc_favored: alpha_ok,
        beta_rnc_favored: beta_ok,
        alpha_sigma_threshold: if nu > 0.0 {
            alpha_sigma_threshold(n, nu, r.lambda, r.l_alpha_sq, r.v_alpha)
        } else {
            0.0
        },
        beta_sigma_threshold: if nu > 0.0 && r.p > 0 {
            beta_sigma_threshold(
                r.trace_xtx_inv,
                nu,
                r.mu,
                r.lambda,
                r.l_alpha_sq,
                r.ols_beta_bias_sq,
            )
        } else {
            0.0
        },
    }
}

/// One point of the prediction-error decomposition along a lambda path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub lambda: f64,
    /// `||X~ b||^2`.
    pub bias_sq: f64,
    /// `sigma^2 ||S_lambda||_F^2`.
    pub variance: f64,
    /// `lambda^2 / nu ||L alpha||^2`.
    pub bias_bound: f64,
}

pub fn bias_variance_path(
    x: &DMatrix<f64>,
    l: &Laplacian,
    alpha: &[f64],
    beta: &[f64],
    sigma2: f64,
    lambdas: &[f64],
) -> Result<Vec<TradeoffPoint>> {
    check(x, l, alpha, beta)?;
    let la = l_alpha(l, alpha);
    let la_sq: f64 = la.iter().map(|v| v * v).sum();
    lambdas
        .iter()
        .map(|&lam| {
            let d = Dense::new(x, l, lam)?;
            let b = d.bias(lam, &la);
            let nu = assumption_nu(x, l, lam)?;
            Ok(TradeoffPoint {
                lambda: lam,
                bias_sq: (&d.xt * b).norm_squared(),
                variance: sigma2 * d.shrinkage().norm_squared(),
                bias_bound: if nu > 0.0 {
                    lam * lam / nu * la_sq
                } else {
                    f64::INFINITY
                },
            })
        })
        .collect()
}

/// Observed distance between fits under `L` and a sparsifier `L*`, with both bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsificationBound {
    pub observed_sq_diff: f64,
    /// The min-form bound.
    pub bound_eq17: f64,
    /// The linear-model form `2 eps lambda a'La / lambda_min(X~'X~ + lambda M)`.
    pub bound_eq19: f64,
}

/// Strong-convexity modulus of the least-squares RNC objective,
/// `2 lambda_min(X~'X~ + lambda M)`.
pub fn linear_strong_convexity(x: &DMatrix<f64>, l: &Laplacian, lambda: f64) -> Result<f64> {
    guard(l.dim() + x.ncols())?;
    Ok(2.0 * min_eigenvalue(rnc_system_matrix(l, x, lambda)?))
}

/// Largest eigenvalue of a Laplacian.
pub fn largest_eigenvalue(l: &Laplacian) -> Result<f64> {
    guard(l.dim())?;
    Ok(SymmetricEigen::new(l.to_dense()).eigenvalues.max())
}

/// Error bound between `theta_hat` (Laplacian `L`) and `theta_star` (`L*`)
/// for `(1 - eps) L <= L* <= (1 + eps) L`, given strong convexity `m_strong`.
#[allow(clippy::too_many_arguments)]
pub fn sparsification_bound(
    alpha: &[f64],
    beta: &[f64],
    alpha_star: &[f64],
    beta_star: &[f64],
    l: &Laplacian,
    l_star: &Laplacian,
    lambda: f64,
    epsilon: f64,
    m_strong: f64,
) -> Result<SparsificationBound> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(NetcohError::InvalidParameter(format!(
            "epsilon must lie in (0, 1/2), got {epsilon}"
        )));
    }
    if !(m_strong > 0.0) {
        return Err(NetcohError::InvalidParameter(format!(
            "strong convexity must be positive, got {m_strong}"
        )));
    }
    if alpha.len() != alpha_star.len() || beta.len() != beta_star.len() || l.dim() != l_star.dim() {
        return Err(NetcohError::DimensionMismatch {
            expected: alpha.len() + beta.len(),
            found: alpha_star.len() + beta_star.len(),
        });
    }
    let observed = alpha
        .iter()
        .zip(alpha_star)
        .chain(beta.iter().zip(beta_star))
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let pen = crate::graph::cohesion_penalty(l, alpha)?;
    let pen_star = crate::graph::cohesion_penalty(l_star, alpha_star)?;
    let lam1 = largest_eigenvalue(l)?;
    let norm_sq: f64 = alpha.iter().map(|a| a * a).sum();
    let c = 2.0 * epsilon * lambda / m_strong;
    let first = 2.0 * pen + (pen - pen_star).abs() + 2.0 * epsilon * pen_star;
    let second = c * lam1 * lam1 * norm_sq;
    Ok(SparsificationBound {
        observed_sq_diff: observed,
        bound_eq17: c * first.min(second),
        bound_eq19: 2.0 * epsilon * lambda * pen / (m_strong / 2.0),
    })
}
