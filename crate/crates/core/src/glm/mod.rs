//! Penalized generalized linear models: logistic and Cox proportional hazards.
//!
//! Both maximize `loglik(alpha + X beta) - lambda alpha'(L + gamma I)alpha` by
//! damped Newton steps. Every Newton system has the RNC block structure with
//! the data curvature in place of the identity, so it is solved by the same
//! block elimination as the linear model.

pub mod cox;
pub mod logistic;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NetcohError, Result};
use crate::graph::{cohesion_penalty, Laplacian};
use crate::solver::{block_eliminate, Curvature, SolverOptions};
use crate::standardize::Standardization;
use crate::Family;

pub use cox::{
    cox_partial_loglik, fit_cox, fit_plain_cox, ppl_metric, SurvivalData, DEFAULT_GAMMA_COX,
};
pub use logistic::{
    fit_logistic, fit_plain_logistic, logistic_predict_prob, DEFAULT_GAMMA_LOGISTIC,
};

/// Stopping rules of the Newton iteration.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Converged once the Euclidean norm of the full gradient is at most this.
    pub tol: f64,
    /// Relative objective change under which a step counts as stagnant.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub solver: SolverOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            rel_tol: 1e-9,
            max_iter: 100,
            max_halvings: 20,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlmFit {
    pub family: Family,
    pub alpha_hat: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective at the returned parameters.
    pub objective: f64,
    pub gradient_norm: f64,
    /// Objective after every accepted step, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub standardization: Standardization,
}

/// A log-likelihood in the linear predictor `eta`, with first and second derivatives.
pub(crate) trait Likelihood: Sync {
    fn loglik(&self, eta: &[f64]) -> f64;
    fn grad_eta(&self, eta: &[f64]) -> Vec<f64>;
    /// Runs `f` with the negative Hessian in `eta`.
    fn with_curvature<R>(&self, eta: &[f64], f: impl FnOnce(Curvature<'_>) -> R) -> R;
    /// Likelihood unchanged by adding a constant to `eta`.
    fn shift_invariant(&self) -> bool {
        false
    }
}

pub(crate) struct Penalized<'a, T: Likelihood> {
    pub lik: &'a T,
    pub l: &'a Laplacian,
    pub xs: &'a DMatrix<f64>,
    pub lambda: f64,
}

impl<T: Likelihood> Penalized<'_, T> {
    pub fn eta(&self, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        if beta.is_empty() {
            return alpha.to_vec();
        }
        let xb = self.xs * DVector::from_column_slice(beta);
        alpha.iter().zip(xb.iter()).map(|(a, b)| a + b).collect()
    }

    pub fn objective(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        let eta = self.eta(alpha, beta);
        self.lik.loglik(&eta) - self.lambda * cohesion_penalty(self.l, alpha).unwrap_or(f64::NAN)
    }

    /// Gradient of the penalized objective, `(g_alpha, g_beta)`.
    pub fn gradient(&self, alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let eta = self.eta(alpha, beta);
        let ge = self.lik.grad_eta(&eta);
        let mut la = vec![0.0; alpha.len()];
        self.l.apply_into(alpha, &mut la);
        let ga: Vec<f64> = ge
            .iter()
            .zip(&la)
            .map(|(g, l)| g - 2.0 * self.lambda * l)
            .collect();
        let gb = self
            .xs
            .tr_mul(&DVector::from_column_slice(&ge))
            .as_slice()
            .to_vec();
        (ga, gb)
    }

    fn grad_norm(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        let (ga, gb) = self.gradient(alpha, beta);
        ga.iter().chain(&gb).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Value and gradient `(value, g_alpha, g_beta)` of the penalized
/// log-likelihood `loglik(alpha + X beta) - lambda alpha'(L + gamma I)alpha`,
/// with `x` used as given.
#[allow(clippy::too_many_arguments)]
pub fn penalized_loglik(
    x: &DMatrix<f64>,
    response: &crate::model_selection::Response,
    g: &crate::graph::Graph,
    lambda: f64,
    gamma: f64,
    alpha: &[f64],
    beta: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    use crate::model_selection::Response;
    let n = response.len();
    if x.nrows() != n || g.node_count() != n || alpha.len() != n || beta.len() != x.ncols() {
        return Err(NetcohError::DimensionMismatch {
            expected: n,
            found: alpha.len(),
        });
    }
    let l = crate::graph::laplacian(g, gamma)?;
    fn eval<T: Likelihood>(p: Penalized<'_, T>, a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let (ga, gb) = p.gradient(a, b);
        (p.objective(a, b), ga, gb)
    }
    match response {
        Response::Binary(y) => {
            logistic::check_binary(y)?;
            let lik = logistic::Bernoulli { y };
            Ok(eval(
                Penalized {
                    lik: &lik,
                    l: &l,
                    xs: x,
                    lambda,
                },
                alpha,
                beta,
            ))
        }
        Response::Survival(s) => {
            let lik = cox::Breslow::new(s);
            Ok(eval(
                Penalized {
                    lik: &lik,
                    l: &l,
                    xs: x,
                    lambda,
                },
                alpha,
                beta,
            ))
        }
        Response::Continuous(_) => Err(NetcohError::InvalidParameter(
            "penalized likelihood is defined for logistic and Cox responses".into(),
        )),
    }
}

fn center(alpha: &mut [f64]) {
    let m = alpha.iter().sum::<f64>() / alpha.len().max(1) as f64;
    alpha.iter_mut().for_each(|a| *a -= m);
}

pub(crate) struct NewtonResult {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub gradient_norm: f64,
    pub trace: Vec<f64>,
}

/// Damped Newton ascent on the penalized objective.
pub(crate) fn newton<T: Likelihood>(
    prob: &Penalized<'_, T>,
    init: Option<(&[f64], &[f64])>,
    opts: &NewtonOptions,
) -> Result<NewtonResult> {
    let n = prob.l.dim();
    let p = prob.xs.ncols();
    let (mut alpha, mut beta) = match init {
        Some((a, b)) => {
            if a.len() != n || b.len() != p {
                return Err(NetcohError::DimensionMismatch {
                    expected: n + p,
                    found: a.len() + b.len(),
                });
            }
            (a.to_vec(), b.to_vec())
        }
        None => (vec![0.0; n], vec![0.0; p]),
    };
    if prob.lik.shift_invariant() {
        center(&mut alpha);
    }
    let mut f = prob.objective(&alpha, &beta);
    if !f.is_finite() {
        return Err(NetcohError::InvalidInput(
            "objective is not finite at the starting point".into(),
        ));
    }
    let mut trace = vec![f];
    let mut gnorm = prob.grad_norm(&alpha, &beta);
    let mut iterations = 0;
    while gnorm > opts.tol && iterations < opts.max_iter {
        let (ga, gb) = prob.gradient(&alpha, &beta);
        let eta = prob.eta(&alpha, &beta);
        let step = prob.lik.with_curvature(&eta, |h| {
            block_eliminate(
                prob.l,
                prob.xs,
                2.0 * prob.lambda,
                h,
                &ga,
                &gb,
                &opts.solver,
            )
        })?;
        iterations += 1;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut a_new: Vec<f64> = alpha.iter().zip(&step.a1).map(|(a, d)| a + t * d).collect();
            let b_new: Vec<f64> = beta.iter().zip(&step.a2).map(|(b, d)| b + t * d).collect();
            if prob.lik.shift_invariant() {
                // Exact maximization along the constant direction.
                center(&mut a_new);
            }
            let f_new = prob.objective(&a_new, &b_new);
            if f_new.is_finite() && f_new >= f {
                accepted = Some((a_new, b_new, f_new));
                break;
            }
            t *= 0.5;
        }
        let Some((a_new, b_new, f_new)) = accepted else {
            log::debug!("step halving exhausted at iteration {iterations}");
            break;
        };
        let rel = (f_new - f).abs() / f.abs().max(1.0);
        alpha = a_new;
        beta = b_new;
        f = f_new;
        trace.push(f);
        let g_prev = gnorm;
        gnorm = prob.grad_norm(&alpha, &beta);
        log::trace!(
            "newton iteration {iterations}: objective {f:.12e}, gradient {gnorm:.3e}, step {t}"
        );
        if rel <= opts.rel_tol && gnorm > opts.tol && gnorm > 0.5 * g_prev {
            log::debug!("objective stagnated at iteration {iterations}");
            break;
        }
    }
    Ok(NewtonResult {
        converged: gnorm <= opts.tol,
        alpha,
        beta,
        iterations,
        objective: f,
        gradient_norm: gnorm,
        trace,
    })
}

/// Dense Newton ascent for a likelihood in `eta = Z b` with a small dense `Z`.
/// Used by the network-free reference fits.
pub(crate) fn dense_newton<T: Likelihood>(
    lik: &T,
    z: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, bool)> {
    let q = z.ncols();
    let mut b = DVector::zeros(q);
    let eta_of = |b: &DVector<f64>| -> Vec<f64> { (z * b).as_slice().to_vec() };
    let mut eta = eta_of(&b);
    let mut f = lik.loglik(&eta);
    for _ in 0..max_iter {
        let g = z.tr_mul(&DVector::from_vec(lik.grad_eta(&eta)));
        if g.norm() <= tol {
            return Ok((b.as_slice().to_vec(), f, true));
        }
        let hz = lik.with_curvature(&eta, |h| {
            let mut out = DMatrix::zeros(z.nrows(), q);
            for j in 0..q {
                let col: Vec<f64> = z.column(j).iter().copied().collect();
                let mut y = vec![0.0; col.len()];
                apply_curvature(&h, &col, &mut y);
                out.column_mut(j).copy_from_slice(&y);
            }
            out
        });
        let hess = z.tr_mul(&hz);
        let dir = hess
            .clone()
            .cholesky()
            .map(|c| c.solve(&g))
            .or_else(|| hess.lu().solve(&g))
            .ok_or_else(|| NetcohError::Singular("information matrix is singular".into()))?;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..=20 {
            let cand = &b + &dir * t;
            let e = eta_of(&cand);
            let fc = lik.loglik(&e);
            if fc.is_finite() && fc >= f {
                b = cand;
                eta = e;
                f = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let g = z.tr_mul(&DVector::from_vec(lik.grad_eta(&eta)));
    Ok((b.as_slice().to_vec(), f, g.norm() <= tol))
}

fn apply_curvature(h: &Curvature<'_>, x: &[f64], y: &mut [f64]) {
    match h {
        Curvature::Identity => y.copy_from_slice(x),
        Curvature::Diagonal(w) => {
            for i in 0..x.len() {
                y[i] = w[i] * x[i];
            }
        }
        Curvature::Operator(op) => op.apply(x, y),
    }
}

/// Network-free reference fit: coefficients on the standardized scale plus an
/// optional intercept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlainFit {
    pub intercept: f64,
    pub beta_hat: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub standardization: Standardization,
}
