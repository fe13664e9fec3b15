//! Logistic regression with network cohesion, fitted by iteratively reweighted
//! penalized least squares.

use nalgebra::DMatrix;

use super::{dense_newton, newton, GlmFit, Likelihood, NewtonOptions, Penalized, PlainFit};
use crate::error::{NetcohError, Result};
use crate::graph::{laplacian, Graph};
use crate::linear::standardize_design;
use crate::solver::Curvature;
use crate::Family;

pub const DEFAULT_GAMMA_LOGISTIC: f64 = 0.01;

const ETA_CLIP: f64 = 30.0;
const WEIGHT_FLOOR: f64 = 1e-10;

/// Logistic function of a clipped linear predictor.
pub fn sigmoid(eta: f64) -> f64 {
    let e = eta.clamp(-ETA_CLIP, ETA_CLIP);
    1.0 / (1.0 + (-e).exp())
}

/// `log(1 + exp(eta))` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

pub(crate) struct Bernoulli<'a> {
    pub y: &'a [f64],
}

impl Likelihood for Bernoulli<'_> {
    fn loglik(&self, eta: &[f64]) -> f64 {
        self.y
            .iter()
            .zip(eta)
            .map(|(y, e)| y * e - softplus(*e))
            .sum()
    }

    fn grad_eta(&self, eta: &[f64]) -> Vec<f64> {
        self.y
            .iter()
            .zip(eta)
            .map(|(y, e)| y - sigmoid(*e))
            .collect()
    }

    fn with_curvature<R>(&self, eta: &[f64], f: impl FnOnce(Curvature<'_>) -> R) -> R {
        let w: Vec<f64> = eta
            .iter()
            .map(|e| {
                let p = sigmoid(*e);
                (p * (1.0 - p)).max(WEIGHT_FLOOR)
            })
            .collect();
        f(Curvature::Diagonal(&w))
    }
}

pub(crate) fn check_binary(y: &[f64]) -> Result<()> {
    if let Some(v) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(NetcohError::InvalidInput(format!(
            "logistic response must be 0 or 1, found {v}"
        )));
    }
    Ok(())
}

/// Maximizes the penalized Bernoulli log-likelihood. `init` is a warm start
/// `(alpha, beta)` on the standardized scale.
#[allow(clippy::too_many_arguments)]
pub fn fit_logistic(
    x: &DMatrix<f64>,
    y: &[f64],
    g: &Graph,
    lambda: f64,
    gamma: f64,
    opts: &NewtonOptions,
    init: Option<(&[f64], &[f64])>,
) -> Result<GlmFit> {
    if x.nrows() != y.len() || g.node_count() != y.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: y.len(),
            found: if x.nrows() != y.len() {
                x.nrows()
            } else {
                g.node_count()
            },
        });
    }
    check_binary(y)?;
    if !(gamma > 0.0) {
        return Err(NetcohError::InvalidParameter(format!(
            "logistic fits need gamma > 0 (got {gamma})"
        )));
    }
    if !(lambda > 0.0) {
        return Err(NetcohError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let (xs, st) = standardize_design(x)?;
    let l = laplacian(g, gamma)?;
    let lik = Bernoulli { y };
    let prob = Penalized {
        lik: &lik,
        l: &l,
        xs: &xs,
        lambda,
    };
    let res = newton(&prob, init, opts)?;
    if !res.converged {
        log::warn!(
            "logistic fit stopped after {} iterations with gradient norm {:.3e}",
            res.iterations,
            res.gradient_norm
        );
    }
    Ok(GlmFit {
        family: Family::Logistic,
        alpha_hat: res.alpha,
        beta_hat: res.beta,
        lambda,
        gamma,
        iterations: res.iterations,
        converged: res.converged,
        objective: res.objective,
        gradient_norm: res.gradient_norm,
        objective_trace: res.trace,
        standardization: st,
    })
}

/// Probabilities `sigmoid(alpha + x beta)` for new rows on the original scale.
pub fn logistic_predict_prob(
    fit: &GlmFit,
    x_new: &DMatrix<f64>,
    alpha_new: &[f64],
) -> Result<Vec<f64>> {
    let eta =
        crate::linear::linear_predictor(alpha_new, &fit.beta_hat, &fit.standardization, x_new)?;
    Ok(eta.into_iter().map(sigmoid).collect())
}

/// Ordinary maximum-likelihood logistic regression, optionally with an intercept.
pub fn fit_plain_logistic(x: &DMatrix<f64>, y: &[f64], intercept: bool) -> Result<PlainFit> {
    if x.nrows() != y.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: y.len(),
            found: x.nrows(),
        });
    }
    check_binary(y)?;
    let (xs, st) = standardize_design(x)?;
    let z = if intercept {
        xs.clone().insert_column(0, 1.0)
    } else {
        xs
    };
    let (b, ll, converged) = dense_newton(&Bernoulli { y }, &z, 1e-9, 100)?;
    let (b0, beta) = if intercept {
        (b[0], b[1..].to_vec())
    } else {
        (0.0, b)
    };
    Ok(PlainFit {
        intercept: b0,
        beta_hat: beta,
        loglik: ll,
        converged,
        standardization: st,
    })
}
