//! Prediction for new nodes, k-fold cross-validation over lambda, error metrics
//! and forward selection.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NetcohError, Result};
use crate::glm::{
    fit_cox, fit_logistic, fit_plain_cox, fit_plain_logistic, logistic_predict_prob, ppl_metric,
    GlmFit, NewtonOptions, SurvivalData,
};
use crate::graph::{connected_components, split_for_prediction, Graph, LaplacianBlocks};
use crate::linear::{fit_linear, fitted_values, linear_predictor, ols_fit, LinearFit};
use crate::solver::{pcg, SolverOptions};
use crate::{derive_seed, Family};

/// Held-out effects minimizing the cohesion penalty of the enlarged network
/// with the training effects fixed: solves `(L11 + gamma_pred I) a = -L12 alpha`.
///
/// `alpha_train` is ordered like `blocks.train_ids`; the result like `blocks.test_ids`.
pub fn predict_new_nodes(
    alpha_train: &[f64],
    blocks: &LaplacianBlocks,
    gamma_pred: f64,
) -> Result<Vec<f64>> {
    if alpha_train.len() != blocks.train_ids.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: blocks.train_ids.len(),
            found: alpha_train.len(),
        });
    }
    if !(gamma_pred >= 0.0) || !gamma_pred.is_finite() {
        return Err(NetcohError::InvalidParameter(format!(
            "gamma_pred must be >= 0, got {gamma_pred}"
        )));
    }
    let m = blocks.test_ids.len();
    if gamma_pred == 0.0 {
        let isolated = unanchored(blocks);
        if !isolated.is_empty() {
            return Err(NetcohError::IsolatedNewNodes(
                isolated.into_iter().map(|i| blocks.test_ids[i]).collect(),
            ));
        }
    }
    let mut rhs = blocks.l12.mul_vec(alpha_train)?;
    rhs.iter_mut().for_each(|v| *v = -*v);
    let a = if gamma_pred > 0.0 {
        blocks.l11.shifted(gamma_pred)
    } else {
        blocks.l11.clone()
    };
    let (sol, rep) = pcg(&a, &rhs, None, 1e-13, 20 * m + 100, true);
    if !rep.converged && rep.final_residual > 1e-8 {
        log::warn!(
            "new-node solve stopped at relative residual {:.3e}",
            rep.final_residual
        );
    }
    Ok(sol)
}

/// Positions (within the test block) of held-out nodes with no path to a training node.
fn unanchored(blocks: &LaplacianBlocks) -> Vec<usize> {
    let m = blocks.test_ids.len();
    let edges = (0..m).flat_map(|i| {
        blocks
            .l11
            .row(i)
            .filter(move |&(j, _)| j > i)
            .map(move |(j, _)| (i, j))
    });
    let g = Graph::from_unweighted(m, edges).expect("test block of a valid graph");
    let labels = connected_components(&g);
    let ncomp = labels.iter().copied().max().map_or(0, |c| c + 1);
    let mut anchored = vec![false; ncomp];
    for i in 0..m {
        if blocks.l12.row(i).next().is_some() {
            anchored[labels[i]] = true;
        }
    }
    (0..m).filter(|&i| !anchored[labels[i]]).collect()
}

/// Held-out prediction used by cross-validation. With `gamma_pred = 0`, nodes
/// cut off from every training node get the mean training effect.
fn predict_held_out(
    alpha_train: &[f64],
    blocks: &LaplacianBlocks,
    gamma_pred: f64,
) -> Result<Vec<f64>> {
    if gamma_pred > 0.0 || unanchored(blocks).is_empty() {
        return predict_new_nodes(alpha_train, blocks, gamma_pred);
    }
    let c = alpha_train.iter().sum::<f64>() / alpha_train.len().max(1) as f64;
    let shifted: Vec<f64> = alpha_train.iter().map(|a| a - c).collect();
    let a = predict_new_nodes(&shifted, blocks, 1e-10)?;
    Ok(a.into_iter().map(|v| v + c).collect())
}

/// Observed responses of any supported family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Response {
    Continuous(Vec<f64>),
    Binary(Vec<f64>),
    Survival(SurvivalData),
}

impl Response {
    pub fn family(&self) -> Family {
        match self {
            Response::Continuous(_) => Family::Linear,
            Response::Binary(_) => Family::Logistic,
            Response::Survival(_) => Family::Cox,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Response::Continuous(y) | Response::Binary(y) => y.len(),
            Response::Survival(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset(&self, ids: &[usize]) -> Response {
        match self {
            Response::Continuous(y) => Response::Continuous(ids.iter().map(|&i| y[i]).collect()),
            Response::Binary(y) => Response::Binary(ids.iter().map(|&i| y[i]).collect()),
            Response::Survival(s) => Response::Survival(s.subset(ids)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub gamma: f64,
    /// Ridge used when predicting held-out effects; defaults to `gamma`.
    pub gamma_pred: Option<f64>,
    pub solver: SolverOptions,
    pub newton: NewtonOptions,
}

impl CvOptions {
    pub fn new(k: usize, seed: u64, gamma: f64) -> Self {
        Self {
            k,
            seed,
            gamma,
            gamma_pred: None,
            solver: SolverOptions::default(),
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CVReport {
    pub family: Family,
    pub k: usize,
    pub seed: u64,
    pub lambda_grid: Vec<f64>,
    /// `fold_errors[i][f]`: error of `lambda_grid[i]` on fold `f`.
    pub fold_errors: Vec<Vec<f64>>,
    pub mean_error: Vec<f64>,
    pub std_error: Vec<f64>,
    pub selected_lambda: f64,
    /// Fold index of every node.
    pub folds: Vec<usize>,
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default tuning grid: 20 log-spaced values on `[1e-3, 1e2]`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-3, 1e2, 20)
}

fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut folds = vec![0; n];
    for (pos, &v) in perm.iter().enumerate() {
        folds[v] = pos % k;
    }
    folds
}

/// k-fold cross-validation of `lambda` over `grid`. Each fold is fitted on the
/// subgraph induced by the training nodes; held-out effects come from
/// [`predict_new_nodes`] on the full graph. The loss is squared error (linear),
/// mean deviance (logistic) or negative predictive partial log-likelihood (Cox).
pub fn kfold_cv(
    x: &DMatrix<f64>,
    response: &Response,
    g: &Graph,
    grid: &[f64],
    opts: &CvOptions,
) -> Result<CVReport> {
    let n = response.len();
    if x.nrows() != n || g.node_count() != n {
        return Err(NetcohError::DimensionMismatch {
            expected: n,
            found: x.nrows(),
        });
    }
    if grid.is_empty() {
        return Err(NetcohError::InvalidParameter("lambda grid is empty".into()));
    }
    if grid[0] <= 0.0
        || grid.windows(2).any(|w| w[1] <= w[0])
        || grid.iter().any(|v| !v.is_finite())
    {
        return Err(NetcohError::InvalidParameter(
            "lambda grid must be positive and strictly increasing".into(),
        ));
    }
    let k = opts.k;
    if k < 2 || k > n {
        return Err(NetcohError::InvalidParameter(format!(
            "k must lie in [2, {n}], got {k}"
        )));
    }
    let gamma_pred = opts.gamma_pred.unwrap_or(opts.gamma);

    let mut folds = assign_folds(n, k, opts.seed);
    if let Response::Survival(s) = response {
        let no_events =
            |folds: &[usize]| (0..k).any(|f| !(0..n).any(|v| folds[v] == f && s.event[v]));
        if no_events(&folds) {
            folds = assign_folds(n, k, derive_seed(opts.seed, 1));
            if no_events(&folds) {
                return Err(NetcohError::InvalidInput(
                    "a cross-validation fold has no events; use fewer folds".into(),
                ));
            }
        }
    }

    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| {
            let train = (0..n).filter(|&v| folds[v] != f).collect();
            let test = (0..n).filter(|&v| folds[v] == f).collect();
            (train, test)
        })
        .collect();

    let errors: Vec<Vec<f64>> = match response {
        Response::Continuous(y) => {
            let pairs: Vec<(usize, usize)> = (0..k)
                .flat_map(|f| (0..grid.len()).map(move |i| (f, i)))
                .collect();
            let flat: Vec<Result<f64>> = pairs
                .par_iter()
                .map(|&(f, i)| {
                    let (train, test) = &splits[f];
                    linear_fold_error(x, y, g, train, test, grid[i], opts, gamma_pred)
                })
                .collect();
            let mut out = vec![vec![0.0; k]; grid.len()];
            for (&(f, i), e) in pairs.iter().zip(flat) {
                out[i][f] = e?;
            }
            out
        }
        _ => {
            let per_fold: Vec<Result<Vec<f64>>> = (0..k)
                .into_par_iter()
                .map(|f| {
                    let (train, test) = &splits[f];
                    glm_fold_errors(x, response, g, train, test, grid, opts, gamma_pred)
                })
                .collect();
            let mut out = vec![vec![0.0; k]; grid.len()];
            for (f, errs) in per_fold.into_iter().enumerate() {
                for (i, e) in errs?.into_iter().enumerate() {
                    out[i][f] = e;
                }
            }
            out
        }
    };

    let kf = k as f64;
    let mean_error: Vec<f64> = errors.iter().map(|e| e.iter().sum::<f64>() / kf).collect();
    let std_error: Vec<f64> = errors
        .iter()
        .zip(&mean_error)
        .map(|(e, m)| {
            (e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (kf - 1.0)).sqrt() / kf.sqrt()
        })
        .collect();
    let mut best = 0;
    for i in 1..grid.len() {
        // Ties go to the larger lambda.
        if mean_error[i] <= mean_error[best] {
            best = i;
        }
    }
    Ok(CVReport {
        family: response.family(),
        k,
        seed: opts.seed,
        lambda_grid: grid.to_vec(),
        fold_errors: errors,
        mean_error,
        std_error,
        selected_lambda: grid[best],
        folds,
    })
}

fn rows(x: &DMatrix<f64>, ids: &[usize]) -> DMatrix<f64> {
    x.select_rows(ids)
}

#[allow(clippy::too_many_arguments)]
fn linear_fold_error(
    x: &DMatrix<f64>,
    y: &[f64],
    g: &Graph,
    train: &[usize],
    test: &[usize],
    lambda: f64,
    opts: &CvOptions,
    gamma_pred: f64,
) -> Result<f64> {
    let sub = g.induced_subgraph(train)?;
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let fit = fit_linear(
        &rows(x, train),
        &y_train,
        &sub,
        lambda,
        opts.gamma,
        &opts.solver,
    )?;
    let blocks = split_for_prediction(g, test)?;
    let a_test = predict_held_out(&fit.alpha_hat, &blocks, gamma_pred)?;
    let pred = linear_predictor(
        &a_test,
        &fit.beta_hat,
        &fit.standardization,
        &rows(x, &blocks.test_ids),
    )?;
    Ok(blocks
        .test_ids
        .iter()
        .zip(&pred)
        .map(|(&v, p)| (y[v] - p).powi(2))
        .sum::<f64>()
        / test.len() as f64)
}

/// Mean binomial deviance.
pub fn mean_deviance(y: &[f64], p: &[f64]) -> f64 {
    let eps = 1e-15;
    -2.0 * y
        .iter()
        .zip(p)
        .map(|(y, p)| {
            let p = p.clamp(eps, 1.0 - eps);
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum::<f64>()
        / y.len().max(1) as f64
}

#[allow(clippy::too_many_arguments)]
fn glm_fold_errors(
    x: &DMatrix<f64>,
    response: &Response,
    g: &Graph,
    train: &[usize],
    test: &[usize],
    grid: &[f64],
    opts: &CvOptions,
    gamma_pred: f64,
) -> Result<Vec<f64>> {
    let sub = g.induced_subgraph(train)?;
    let x_train = rows(x, train);
    let blocks = split_for_prediction(g, test)?;
    let mut out = vec![0.0; grid.len()];
    let mut warm: Option<GlmFit> = None;
    // Warm starts run from the most to the least regularized fit.
    for i in (0..grid.len()).rev() {
        let init = warm
            .as_ref()
            .map(|w| (w.alpha_hat.as_slice(), w.beta_hat.as_slice()));
        let fit = match response {
            Response::Binary(y) => {
                let y_train: Vec<f64> = train.iter().map(|&v| y[v]).collect();
                fit_logistic(
                    &x_train,
                    &y_train,
                    &sub,
                    grid[i],
                    opts.gamma,
                    &opts.newton,
                    init,
                )?
            }
            Response::Survival(s) => fit_cox(
                &x_train,
                &s.subset(train),
                &sub,
                grid[i],
                opts.gamma,
                &opts.newton,
                init,
            )?,
            Response::Continuous(_) => unreachable!("linear responses are handled separately"),
        };
        out[i] = match response {
            Response::Binary(y) => {
                let a_test = predict_held_out(&fit.alpha_hat, &blocks, gamma_pred)?;
                let p = logistic_predict_prob(&fit, &rows(x, &blocks.test_ids), &a_test)?;
                let y_test: Vec<f64> = blocks.test_ids.iter().map(|&v| y[v]).collect();
                mean_deviance(&y_test, &p)
            }
            Response::Survival(s) => {
                let mut f = fit.clone();
                f.gamma = gamma_pred;
                -ppl_metric(&f, x, s, train, test, g)?
            }
            Response::Continuous(_) => unreachable!(),
        };
        warm = Some(fit);
    }
    Ok(out)
}

/// Mean squared error of the fitted means of `fit` on `x_test` against the
/// true means.
pub fn mspe(fit: &LinearFit, x_test: &DMatrix<f64>, truth_mean: &[f64]) -> Result<f64> {
    let pred = fitted_values(fit, x_test)?;
    mean_squared_error(&pred, truth_mean)
}

pub fn mean_squared_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// `1 - err_model / err_baseline`.
pub fn relative_improvement(err_model: f64, err_baseline: f64) -> Result<f64> {
    if !(err_baseline > 0.0) || !err_baseline.is_finite() {
        return Err(NetcohError::InvalidParameter(format!(
            "baseline error must be positive, got {err_baseline}"
        )));
    }
    Ok(1.0 - err_model / err_baseline)
}

/// Greedy forward selection. Each step adds the column that most reduces the
/// residual sum of squares (linear, with intercept) or most increases the
/// (partial) log-likelihood (logistic, Cox). Ties go to the lower column index;
/// constant columns are skipped. Returns at most `max_vars` columns in the
/// order they were added.
pub fn forward_selection(
    x_pool: &DMatrix<f64>,
    response: &Response,
    max_vars: Option<usize>,
) -> Result<Vec<usize>> {
    let p = x_pool.ncols();
    if p == 0 {
        return Err(NetcohError::InvalidInput("variable pool is empty".into()));
    }
    if x_pool.nrows() != response.len() {
        return Err(NetcohError::DimensionMismatch {
            expected: response.len(),
            found: x_pool.nrows(),
        });
    }
    let mut candidates: Vec<usize> = Vec::new();
    for j in 0..p {
        let col = x_pool.column(j);
        let first = col[0];
        if col.iter().all(|v| *v == first) {
            log::warn!("column {j} is constant and was skipped");
        } else {
            candidates.push(j);
        }
    }
    let limit = max_vars.unwrap_or(candidates.len()).min(candidates.len());
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < limit {
        let mut best: Option<(usize, f64)> = None;
        for &j in &candidates {
            if chosen.contains(&j) {
                continue;
            }
            let mut cols = chosen.clone();
            cols.push(j);
            let score = match selection_score(&x_pool.select_columns(&cols), response) {
                Ok(s) => s,
                Err(e) => {
                    log::debug!("candidate {j} skipped: {e}");
                    continue;
                }
            };
            if best.is_none_or(|(_, b)| score < b) {
                best = Some((j, score));
            }
        }
        match best {
            Some((j, _)) => chosen.push(j),
            None => break,
        }
    }
    Ok(chosen)
}

/// Smaller is better.
fn selection_score(x: &DMatrix<f64>, response: &Response) -> Result<f64> {
    match response {
        Response::Continuous(y) => {
            let fit = ols_fit(x, y)?;
            let f = fitted_values(&fit, x)?;
            Ok(y.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum())
        }
        Response::Binary(y) => Ok(-fit_plain_logistic(x, y, true)?.loglik),
        Response::Survival(s) => Ok(-fit_plain_cox(x, s)?.loglik),
    }
}
