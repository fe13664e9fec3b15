use nalgebra::DMatrix;
use netcoh::glm::cox::DEFAULT_GAMMA_COX;
use netcoh::glm::logistic::{sigmoid, DEFAULT_GAMMA_LOGISTIC};
use netcoh::glm::{fit_cox, fit_logistic, NewtonOptions};
use netcoh::graph::{cohesion_penalty, connected_components, split_for_prediction};
use netcoh::io::{build_graph, read_edge_list, write_edge_list, Table};
use netcoh::linear::{linear_predictor, DEFAULT_GAMMA_LINEAR};
use netcoh::model_selection::{
    default_lambda_grid, kfold_cv, log_grid, predict_new_nodes, CvOptions, Response,
};
use netcoh::simulate::{
    example1_instance, run_experiment, sparsification_experiment, Method, SimConfig,
    SparsifyExperimentConfig, EXPERIMENT_OVERSAMPLING,
};
use netcoh::sparsify::{spectral_sparsify, SparsifyOptions};
use netcoh::theory::{bias_variance_path, ols_exact_mse, theory_report};
use netcoh::{
    fit_linear, laplacian, standardize, Family, NetcohError, Result, SolverOptions, Standardization,
};
use serde::{Deserialize, Serialize};

use crate::args::{CvArgs, FitArgs, PredictArgs, SimulateArgs, SparsifyArgs, TheoryArgs};
use crate::inputs::{label_index, load_edge_list, load_problem, Nodes};
use crate::manifest::Run;

fn default_gamma(family: Family) -> f64 {
    match family {
        Family::Linear => DEFAULT_GAMMA_LINEAR,
        Family::Logistic => DEFAULT_GAMMA_LOGISTIC,
        Family::Cox => DEFAULT_GAMMA_COX,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Penalty {
    /// `alpha' L alpha`.
    pub cohesion: f64,
    /// `gamma ||alpha||^2`.
    pub ridge: f64,
    /// `lambda alpha'(L + gamma I)alpha`.
    pub total: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual of the sparse solves (linear fits).
    pub final_residual: Option<f64>,
    /// Gradient norm at the returned point (logistic and Cox fits).
    pub gradient_norm: Option<f64>,
    /// Penalized negative log-likelihood (logistic and Cox fits).
    pub objective: Option<f64>,
}

/// Serialized fit.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub family: Family,
    pub lambda: f64,
    pub gamma: f64,
    pub id_column: Option<String>,
    pub node_ids: Vec<String>,
    pub covariates: Vec<String>,
    pub alpha_hat: Vec<f64>,
    /// Coefficients on the original covariate scale.
    pub beta: Vec<f64>,
    /// Linear predictor is `alpha + x'beta - offset`.
    pub offset: f64,
    pub beta_standardized: Vec<f64>,
    pub standardization: Standardization,
    pub penalty: Penalty,
    pub solver: SolverSummary,
}

#[derive(Debug, Serialize)]
struct NodeRow<'a> {
    id: &'a str,
    alpha: f64,
    linear_predictor: f64,
    /// Mean (linear), probability (logistic) or relative hazard (Cox).
    prediction: f64,
}

fn response_scale(family: Family, eta: f64) -> f64 {
    match family {
        Family::Linear => eta,
        Family::Logistic => sigmoid(eta),
        Family::Cox => eta.exp(),
    }
}

fn node_rows<'a>(
    family: Family,
    ids: &'a [String],
    alpha: &[f64],
    eta: &[f64],
) -> Vec<NodeRow<'a>> {
    ids.iter()
        .zip(alpha)
        .zip(eta)
        .map(|((id, a), e)| NodeRow {
            id,
            alpha: *a,
            linear_predictor: *e,
            prediction: response_scale(family, *e),
        })
        .collect()
}

pub fn fit(a: &FitArgs, threads: Option<usize>) -> Result<()> {
    let mut run = Run::start(&a.out)?;
    run.input(&a.data.edges)?;
    run.input(&a.data.data)?;
    let p = load_problem(&a.data, a.family)?;
    let gamma = a.gamma.unwrap_or(default_gamma(a.family));
    if !(a.lambda >= 0.0) || !(gamma >= 0.0) {
        return Err(NetcohError::InvalidParameter(
            "lambda and gamma must be nonnegative".into(),
        ));
    }
    let (alpha, beta_std, st, solver) = match &p.response {
        Response::Continuous(y) => {
            let f = fit_linear(
                &p.x,
                y,
                &p.graph,
                a.lambda,
                gamma,
                &SolverOptions::with_tol(a.tol),
            )?;
            let s = SolverSummary {
                iterations: f.report.iterations,
                converged: f.report.converged,
                final_residual: Some(f.report.final_residual),
                gradient_norm: None,
                objective: None,
            };
            (f.alpha_hat, f.beta_hat, f.standardization, s)
        }
        resp => {
            let mut opts = NewtonOptions::default();
            opts.solver = SolverOptions::with_tol(a.tol);
            let f = match resp {
                Response::Binary(y) => {
                    fit_logistic(&p.x, y, &p.graph, a.lambda, gamma, &opts, None)?
                }
                Response::Survival(s) => fit_cox(&p.x, s, &p.graph, a.lambda, gamma, &opts, None)?,
                Response::Continuous(_) => unreachable!(),
            };
            let s = SolverSummary {
                iterations: f.iterations,
                converged: f.converged,
                final_residual: None,
                gradient_norm: Some(f.gradient_norm),
                objective: Some(f.objective),
            };
            (f.alpha_hat, f.beta_hat, f.standardization, s)
        }
    };
    let l0 = laplacian(&p.graph, 0.0)?;
    let cohesion = cohesion_penalty(&l0, &alpha)?;
    let ridge = gamma * alpha.iter().map(|v| v * v).sum::<f64>();
    let (beta, offset) = st.unscale(&beta_std);
    let eta = linear_predictor(&alpha, &beta_std, &st, &p.x)?;
    let rows = node_rows(a.family, &p.nodes.labels, &alpha, &eta);
    run.write_csv("fitted.csv", &rows)?;
    let model = ModelFile {
        family: a.family,
        lambda: a.lambda,
        gamma,
        id_column: p.nodes.column.clone(),
        node_ids: p.nodes.labels.clone(),
        covariates: p.covariates,
        alpha_hat: alpha,
        beta,
        offset,
        beta_standardized: beta_std,
        standardization: st,
        penalty: Penalty {
            cohesion,
            ridge,
            total: a.lambda * (cohesion + ridge),
        },
        solver,
    };
    run.write_json("model.json", &model)?;
    run.finish("fit", a, threads, None)
}

pub fn predict(a: &PredictArgs, threads: Option<usize>) -> Result<()> {
    let mut run = Run::start(&a.out)?;
    for f in [&a.model, &a.edges, &a.data] {
        run.input(f)?;
    }
    let model: ModelFile = serde_json::from_slice(&std::fs::read(&a.model)?)
        .map_err(|e| NetcohError::InvalidInput(format!("cannot read model: {e}")))?;
    let table = Table::read(&a.data)?;
    let n = model.node_ids.len();
    let id_column = a
        .id_column
        .clone()
        .or_else(|| model.id_column.clone().filter(|c| table.has(c)));
    let new_ids: Vec<String> = match &id_column {
        Some(c) => table.strings(c)?,
        None => (n..n + table.len()).map(|i| i.to_string()).collect(),
    };
    let train_index = label_index(&model.node_ids)?;
    let known: Vec<Option<usize>> = new_ids
        .iter()
        .map(|l| train_index.get(l).copied())
        .collect();
    let x_new = table.matrix(&model.covariates)?;
    let alpha: Vec<f64> = if !known.is_empty() && known.iter().all(Option::is_some) {
        // Training nodes: report their fitted effects.
        known.iter().map(|k| model.alpha_hat[k.unwrap()]).collect()
    } else {
        if let Some(i) = known.iter().position(Option::is_some) {
            return Err(NetcohError::InvalidInput(format!(
                "new node id '{}' collides with a training node",
                new_ids[i]
            )));
        }
        let mut labels = model.node_ids.clone();
        labels.extend(new_ids.iter().cloned());
        let index = label_index(&labels)?;
        let g = build_graph(labels.len(), &read_edge_list(&a.edges)?, Some(&index))?;
        let test: Vec<usize> = (n..labels.len()).collect();
        let blocks = split_for_prediction(&g, &test)?;
        let gamma_pred = a.gamma_pred.unwrap_or(model.gamma);
        predict_new_nodes(&model.alpha_hat, &blocks, gamma_pred)?
    };
    let eta = linear_predictor(
        &alpha,
        &model.beta_standardized,
        &model.standardization,
        &x_new,
    )?;
    run.write_csv(
        "predictions.csv",
        &node_rows(model.family, &new_ids, &alpha, &eta),
    )?;
    run.finish("predict", a, threads, None)
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || NetcohError::InvalidParameter(format!("cannot parse lambda grid '{spec}'"));
    if spec.trim().is_empty() {
        return Ok(default_lambda_grid());
    }
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && count > 0) {
            return Err(bad());
        }
        return Ok(log_grid(lo, hi, count));
    }
    let mut grid = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    grid.dedup();
    Ok(grid)
}

pub fn cv(a: &CvArgs, threads: Option<usize>) -> Result<()> {
    let mut run = Run::start(&a.out)?;
    run.input(&a.data.edges)?;
    run.input(&a.data.data)?;
    let p = load_problem(&a.data, a.family)?;
    let grid = parse_grid(&a.grid)?;
    let mut opts = CvOptions::new(a.k, a.seed, a.gamma.unwrap_or(default_gamma(a.family)));
    opts.gamma_pred = a.gamma_pred;
    let report = kfold_cv(&p.x, &p.response, &p.graph, &grid, &opts)?;
    run.write_json("cv.json", &report)?;
    run.finish("cv", a, threads, Some(a.seed))
}

#[derive(Debug, Serialize)]
struct TradeoffRow {
    lambda: f64,
    bias_sq: f64,
    variance: f64,
    /// `(bias_sq + variance) / n`.
    mspe: f64,
    /// Upper bound of the prediction error, per node.
    mspe_bound: f64,
    ols_mspe: f64,
}

fn scaled(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).ceil() as usize).max(1)
}

pub fn simulate(a: &SimulateArgs, threads: Option<usize>) -> Result<()> {
    if !(a.scale > 0.0) {
        return Err(NetcohError::InvalidParameter(
            "--scale must be positive".into(),
        ));
    }
    let mut run = Run::start(&a.out)?;
    match a.figure {
        1 => {
            let ex = example1_instance(a.seed, false)?;
            let l = laplacian(&ex.graph, 0.0)?;
            let s2 = a.sigma * a.sigma;
            let n = ex.alpha.len() as f64;
            let ols = ols_exact_mse(&ex.x, &ex.alpha, s2)?.mspe / n;
            let path = bias_variance_path(
                &ex.x,
                &l,
                &ex.alpha,
                &ex.beta,
                s2,
                &log_grid(1e-3, 10.0, 41),
            )?;
            let rows: Vec<TradeoffRow> = path
                .iter()
                .map(|t| TradeoffRow {
                    lambda: t.lambda,
                    bias_sq: t.bias_sq,
                    variance: t.variance,
                    mspe: (t.bias_sq + t.variance) / n,
                    mspe_bound: (t.bias_bound + t.variance) / n,
                    ols_mspe: ols,
                })
                .collect();
            run.write_csv("fig1.csv", &rows)?;
        }
        2 | 3 => {
            let family = if a.figure == 2 {
                Family::Linear
            } else {
                Family::Logistic
            };
            let mut cfg = SimConfig {
                sigma: a.sigma,
                seed: a.seed,
                replications: a.replications.unwrap_or(scaled(50, a.scale)),
                ..SimConfig::default()
            };
            if let Some(n) = a.n {
                cfg.n = n;
            }
            let s_grid = a
                .s_grid
                .clone()
                .unwrap_or_else(|| vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0]);
            let rows = run_experiment(&cfg, family, &Method::ALL, &s_grid)?;
            run.write_csv(&format!("fig{}.csv", a.figure), &rows)?;
        }
        _ => {
            let mut cfg = SparsifyExperimentConfig {
                sigma: a.sigma,
                seed: a.seed,
                replications: a.replications.unwrap_or(scaled(5, a.scale)),
                oversampling: a.oversampling.unwrap_or(EXPERIMENT_OVERSAMPLING),
                ..SparsifyExperimentConfig::default()
            };
            if let Some(n) = a.n {
                cfg.n = n;
            }
            let eps = a
                .epsilon_grid
                .clone()
                .unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.3]);
            let rows = sparsification_experiment(&cfg, &eps)?;
            run.write_csv("fig4.csv", &rows)?;
        }
    }
    run.finish("simulate", a, threads, Some(a.seed))
}

#[derive(Debug, Serialize)]
struct CertificateFile {
    epsilon_target: f64,
    verified: Option<bool>,
    measured_epsilon: Option<f64>,
    nodes: usize,
    edges_input: usize,
    edges_kept: usize,
    samples: usize,
    oversampling: f64,
    seed: u64,
}

pub fn sparsify(a: &SparsifyArgs, threads: Option<usize>) -> Result<()> {
    let mut run = Run::start(&a.out)?;
    run.input(&a.edges)?;
    let (g, labels) = load_edge_list(&a.edges, a.nodes)?;
    let res = spectral_sparsify(
        &g,
        a.epsilon,
        a.seed,
        &SparsifyOptions {
            oversampling: a.oversampling,
            verify: !a.no_verify,
        },
    )?;
    let f = std::fs::File::create(run.output("sparsified.tsv"))?;
    write_edge_list(
        &res.graph_star,
        labels.as_deref(),
        std::io::BufWriter::new(f),
    )?;
    run.write_json(
        "certificate.json",
        &CertificateFile {
            epsilon_target: a.epsilon,
            verified: res.certificate.map(|c| c.verified),
            measured_epsilon: res.certificate.map(|c| c.measured_epsilon),
            nodes: g.node_count(),
            edges_input: res.edges_input,
            edges_kept: res.edges_kept,
            samples: res.samples,
            oversampling: a.oversampling,
            seed: a.seed,
        },
    )?;
    run.finish("sparsify", a, threads, Some(a.seed))
}

#[derive(Debug, Serialize)]
struct TheoryFile {
    components: usize,
    edges: usize,
    report: netcoh::theory::TheoryReport,
}

pub fn theory(a: &TheoryArgs, threads: Option<usize>) -> Result<()> {
    let mut run = Run::start(&a.out)?;
    let lambda = a.lambda.unwrap_or(0.1);
    let (g, x, alpha, beta) = if a.example1 {
        let ex = example1_instance(a.seed, a.expected_adjacency)?;
        (ex.graph, ex.x, ex.alpha, ex.beta)
    } else {
        let (edges, data) = (a.edges.as_ref().unwrap(), a.data.as_ref().unwrap());
        run.input(edges)?;
        run.input(data)?;
        let table = Table::read(data)?;
        let nodes = Nodes::from_table(&table, a.id_column.as_deref())?;
        let alpha = table.numeric(&a.alpha_column)?;
        let covariates = match &a.covariates {
            Some(c) => c.clone(),
            None => {
                let mut skip = vec![a.alpha_column.as_str()];
                if let Some(c) = &nodes.column {
                    skip.push(c);
                }
                table.other_columns(&skip)
            }
        };
        let raw = table.matrix(&covariates)?;
        let x = if raw.ncols() > 0 {
            standardize(&raw)?.0
        } else {
            DMatrix::zeros(raw.nrows(), 0)
        };
        let beta = a.beta.clone().unwrap_or_default();
        if beta.len() != covariates.len() {
            return Err(NetcohError::InvalidParameter(format!(
                "--beta has {} values for {} covariates",
                beta.len(),
                covariates.len()
            )));
        }
        let g = build_graph(table.len(), &read_edge_list(edges)?, nodes.index.as_ref())?;
        (g, x, alpha, beta)
    };
    let l = laplacian(&g, 0.0)?;
    let report = theory_report(&x, &l, lambda, &alpha, &beta, a.sigma * a.sigma)?;
    let comps = connected_components(&g)
        .into_iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    run.write_json(
        "theory.json",
        &TheoryFile {
            components: comps,
            edges: g.edge_count(),
            report,
        },
    )?;
    run.finish("theory", a, threads, Some(a.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        let g = parse_grid("0.01:1:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 0.1).abs() < 1e-12);
        assert_eq!(parse_grid("2, 0.5,2").unwrap(), vec![0.5, 2.0]);
        assert_eq!(parse_grid("").unwrap().len(), 20);
        assert!(parse_grid("0:1:3").is_err());
        assert!(parse_grid("a,b").is_err());
    }
}
