//! Cox proportional hazards with network cohesion. Partial likelihood with the
//! Breslow treatment of tied times.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{dense_newton, newton, GlmFit, Likelihood, NewtonOptions, Penalized, PlainFit};
use crate::error::{NetcohError, Result};
use crate::graph::{laplacian, split_for_prediction, Graph};
use crate::linear::{linear_predictor, standardize_design};
use crate::model_selection::predict_new_nodes;
use crate::solver::{Curvature, LinearOperator};
use crate::Family;

pub const DEFAULT_GAMMA_COX: f64 = 0.1;

/// Right-censored survival outcomes, one per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalData {
    pub time: Vec<f64>,
    /// `true` when the event was observed, `false` when censored.
    pub event: Vec<bool>,
}

impl SurvivalData {
    pub fn new(time: Vec<f64>, event: Vec<bool>) -> Result<Self> {
        if time.len() != event.len() {
            return Err(NetcohError::DimensionMismatch {
                expected: time.len(),
                found: event.len(),
            });
        }
        if let Some(t) = time.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(NetcohError::InvalidInput(format!(
                "survival times must be positive, found {t}"
            )));
        }
        if !event.iter().any(|e| *e) {
            return Err(NetcohError::NoEvents);
        }
        Ok(Self { time, event })
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.event.iter().filter(|e| **e).count()
    }

    pub fn subset(&self, ids: &[usize]) -> SurvivalData {
        SurvivalData {
            time: ids.iter().map(|&i| self.time[i]).collect(),
            event: ids.iter().map(|&i| self.event[i]).collect(),
        }
    }
}

/// Risk-set bookkeeping: nodes sorted by time and grouped by tied times.
pub(crate) struct Breslow {
    order: Vec<usize>,
    group_ptr: Vec<usize>,
    group_of: Vec<usize>,
    /// Events per group.
    d: Vec<f64>,
    delta: Vec<f64>,
}

struct RiskState {
    w: Vec<f64>,
    shift: f64,
    s: Vec<f64>,
    a: Vec<f64>,
    c3: Vec<f64>,
}

impl Breslow {
    pub fn new(surv: &SurvivalData) -> Self {
        let n = surv.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| surv.time[i].total_cmp(&surv.time[j]).then(i.cmp(&j)));
        let mut group_ptr = vec![0];
        let mut group_of = vec![0; n];
        let mut d = Vec::new();
        let mut k = 0;
        while k < n {
            let t = surv.time[order[k]];
            let g = d.len();
            let mut events = 0.0;
            while k < n && surv.time[order[k]] == t {
                group_of[order[k]] = g;
                if surv.event[order[k]] {
                    events += 1.0;
                }
                k += 1;
            }
            d.push(events);
            group_ptr.push(k);
        }
        Self {
            order,
            group_ptr,
            group_of,
            d,
            delta: surv
                .event
                .iter()
                .map(|&e| if e { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    fn groups(&self) -> usize {
        self.d.len()
    }

    /// Per-group sums of `v` (in group order).
    fn group_sums(&self, v: &[f64]) -> Vec<f64> {
        (0..self.groups())
            .map(|g| {
                self.order[self.group_ptr[g]..self.group_ptr[g + 1]]
                    .iter()
                    .map(|&u| v[u])
                    .sum()
            })
            .collect()
    }

    fn suffix(mut v: Vec<f64>) -> Vec<f64> {
        for g in (0..v.len().saturating_sub(1)).rev() {
            v[g] += v[g + 1];
        }
        v
    }

    fn state(&self, eta: &[f64]) -> RiskState {
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();
        let s = Self::suffix(self.group_sums(&w));
        let mut a = vec![0.0; self.groups()];
        let mut c3 = vec![0.0; self.groups()];
        let (mut acc_a, mut acc_c) = (0.0, 0.0);
        for g in 0..self.groups() {
            if self.d[g] > 0.0 {
                acc_a += self.d[g] / s[g];
                acc_c += self.d[g] / (s[g] * s[g]);
            }
            a[g] = acc_a;
            c3[g] = acc_c;
        }
        RiskState { w, shift, s, a, c3 }
    }
}

impl Likelihood for Breslow {
    fn loglik(&self, eta: &[f64]) -> f64 {
        let st = self.state(eta);
        let mut ll: f64 = self.delta.iter().zip(eta).map(|(d, e)| d * e).sum();
        for g in 0..self.groups() {
            if self.d[g] > 0.0 {
                ll -= self.d[g] * (st.s[g].ln() + st.shift);
            }
        }
        ll
    }

    fn grad_eta(&self, eta: &[f64]) -> Vec<f64> {
        let st = self.state(eta);
        (0..eta.len())
            .map(|u| self.delta[u] - st.w[u] * st.a[self.group_of[u]])
            .collect()
    }

    fn with_curvature<R>(&self, eta: &[f64], f: impl FnOnce(Curvature<'_>) -> R) -> R {
        let st = self.state(eta);
        let h = CoxHessian { risk: self, st };
        f(Curvature::Operator(&h))
    }

    fn shift_invariant(&self) -> bool {
        true
    }
}

/// Matrix-free negative Hessian of the partial log-likelihood in `eta`.
struct CoxHessian<'a> {
    risk: &'a Breslow,
    st: RiskState,
}

impl LinearOperator for CoxHessian<'_> {
    fn dim(&self) -> usize {
        self.st.w.len()
    }

    fn apply(&self, v: &[f64], y: &mut [f64]) {
        let r = self.risk;
        let wv: Vec<f64> = self.st.w.iter().zip(v).map(|(w, x)| w * x).collect();
        let t = Breslow::suffix(r.group_sums(&wv));
        let mut c2 = vec![0.0; r.groups()];
        let mut acc = 0.0;
        for g in 0..r.groups() {
            if r.d[g] > 0.0 {
                acc += r.d[g] * t[g] / (self.st.s[g] * self.st.s[g]);
            }
            c2[g] = acc;
        }
        for u in 0..v.len() {
            let g = r.group_of[u];
            y[u] = self.st.w[u] * (v[u] * self.st.a[g] - c2[g]);
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|u| {
                let g = self.risk.group_of[u];
                let w = self.st.w[u];
                w * self.st.a[g] - w * w * self.st.c3[g]
            })
            .collect()
    }
}

/// Breslow partial log-likelihood of `eta = alpha + X beta` (X used as given).
pub fn cox_partial_loglik(
    alpha: &[f64],
    beta: &[f64],
    x: &DMatrix<f64>,
    surv: &SurvivalData,
) -> Result<f64> {
    let n = surv.len();
    if alpha.len() != n || x.nrows() != n || x.ncols() != beta.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: n,
            found: alpha.len(),
        });
    }
    if surv.event_count() == 0 {
        return Err(NetcohError::InvalidInput(
            "partial likelihood needs at least one event".into(),
        ));
    }
    let xb = x * nalgebra::DVector::from_column_slice(beta);
    let eta: Vec<f64> = alpha.iter().zip(xb.iter()).map(|(a, b)| a + b).collect();
    Ok(Breslow::new(surv).loglik(&eta))
}

/// Maximizes the penalized partial log-likelihood. The individual effects of the
/// result sum to zero.
#[allow(clippy::too_many_arguments)]
pub fn fit_cox(
    x: &DMatrix<f64>,
    surv: &SurvivalData,
    g: &Graph,
    lambda: f64,
    gamma: f64,
    opts: &NewtonOptions,
    init: Option<(&[f64], &[f64])>,
) -> Result<GlmFit> {
    let n = surv.len();
    if x.nrows() != n || g.node_count() != n {
        return Err(NetcohError::DimensionMismatch {
            expected: n,
            found: if x.nrows() != n {
                x.nrows()
            } else {
                g.node_count()
            },
        });
    }
    if surv.event_count() == 0 {
        return Err(NetcohError::NoEvents);
    }
    if !(gamma > 0.0) {
        return Err(NetcohError::InvalidParameter(format!(
            "Cox fits need gamma > 0 (got {gamma})"
        )));
    }
    if !(lambda > 0.0) {
        return Err(NetcohError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let (xs, st) = standardize_design(x)?;
    let l = laplacian(g, gamma)?;
    let lik = Breslow::new(surv);
    let prob = Penalized {
        lik: &lik,
        l: &l,
        xs: &xs,
        lambda,
    };
    let res = newton(&prob, init, opts)?;
    if !res.converged {
        log::warn!(
            "Cox fit stopped after {} iterations with gradient norm {:.3e}",
            res.iterations,
            res.gradient_norm
        );
    }
    Ok(GlmFit {
        family: Family::Cox,
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

/// Unpenalized Cox regression on the standardized covariates.
pub fn fit_plain_cox(x: &DMatrix<f64>, surv: &SurvivalData) -> Result<PlainFit> {
    if x.nrows() != surv.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: surv.len(),
            found: x.nrows(),
        });
    }
    if surv.event_count() == 0 {
        return Err(NetcohError::NoEvents);
    }
    let (xs, st) = standardize_design(x)?;
    let (beta, ll, converged) = dense_newton(&Breslow::new(surv), &xs, 1e-9, 100)?;
    Ok(PlainFit {
        intercept: 0.0,
        beta_hat: beta,
        loglik: ll,
        converged,
        standardization: st,
    })
}

/// Predictive partial log-likelihood `l_(train+test) - l_(train)`.
///
/// `fit_train.alpha_hat[i]` belongs to node `train_ids[i]`; held-out effects are
/// filled in from the network with ridge `fit_train.gamma`. `train_ids` and
/// `test_ids` must partition the nodes of `g_all`.
pub fn ppl_metric(
    fit_train: &GlmFit,
    x_all: &DMatrix<f64>,
    surv_all: &SurvivalData,
    train_ids: &[usize],
    test_ids: &[usize],
    g_all: &Graph,
) -> Result<f64> {
    if test_ids.is_empty() {
        return Ok(0.0);
    }
    let n = g_all.node_count();
    if surv_all.len() != n || x_all.nrows() != n || fit_train.alpha_hat.len() != train_ids.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: n,
            found: surv_all.len(),
        });
    }
    let mut seen = vec![false; n];
    for &v in train_ids.iter().chain(test_ids) {
        if v >= n {
            return Err(NetcohError::NodeOutOfRange { id: v, n });
        }
        if seen[v] {
            return Err(NetcohError::InvalidInput(format!(
                "node {v} is both training and test"
            )));
        }
        seen[v] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(NetcohError::InvalidInput(
            "training and test nodes must cover the graph".into(),
        ));
    }
    let mut alpha = vec![0.0; n];
    for (i, &v) in train_ids.iter().enumerate() {
        alpha[v] = fit_train.alpha_hat[i];
    }
    let blocks = split_for_prediction(g_all, test_ids)?;
    let a_train: Vec<f64> = blocks.train_ids.iter().map(|&v| alpha[v]).collect();
    let a_test = predict_new_nodes(&a_train, &blocks, fit_train.gamma)?;
    for (i, &v) in blocks.test_ids.iter().enumerate() {
        alpha[v] = a_test[i];
    }
    let eta = linear_predictor(
        &alpha,
        &fit_train.beta_hat,
        &fit_train.standardization,
        x_all,
    )?;
    let l_all = Breslow::new(surv_all).loglik(&eta);
    let sub = surv_all.subset(train_ids);
    let eta_train: Vec<f64> = train_ids.iter().map(|&v| eta[v]).collect();
    let l_train = Breslow::new(&sub).loglik(&eta_train);
    Ok(l_all - l_train)
}
