//! Graph and data generators plus the simulation drivers.

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NetcohError, Result};
use crate::glm::cox::{SurvivalData, DEFAULT_GAMMA_COX};
use crate::glm::logistic::{sigmoid, Bernoulli, DEFAULT_GAMMA_LOGISTIC};
use crate::glm::{dense_newton, fit_logistic, fit_plain_logistic, NewtonOptions};
use crate::graph::{laplacian, Graph};
use crate::linear::{fit_linear, null_model_fit, ols_fit};
use crate::model_selection::{default_lambda_grid, kfold_cv, CvOptions, Response};
use crate::solver::SolverOptions;
use crate::sparsify::{spectral_sparsify, SparsifyOptions};
use crate::standardize::standardize;
use crate::theory::{linear_strong_convexity, sparsification_bound};
use crate::{derive_seed, Family};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Block membership probabilities.
    pub block_probs: Vec<f64>,
    pub p_within: f64,
    pub p_between: f64,
    /// Block means of the individual effects.
    pub eta: Vec<f64>,
    /// Within-block spread of the individual effects.
    pub s: f64,
    /// Noise standard deviation (linear model).
    pub sigma: f64,
    pub p: usize,
    /// Ridge for RNC fits; `None` uses the family default.
    pub gamma: Option<f64>,
    pub cv_folds: usize,
    pub lambda_grid: Vec<f64>,
    /// Target censored fraction for survival data.
    pub censor_fraction: f64,
    pub seed: u64,
    pub replications: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 300,
            block_probs: vec![1.0 / 3.0; 3],
            p_within: 0.5,
            p_between: 0.1,
            eta: vec![-1.0, 0.0, 1.0],
            s: 0.1,
            sigma: 0.5,
            p: 2,
            gamma: None,
            cv_folds: 10,
            lambda_grid: default_lambda_grid(),
            censor_fraction: 0.3,
            seed: 0,
            replications: 50,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NetcohError::InvalidParameter(m.into()));
        if self.block_probs.is_empty() || self.block_probs.len() != self.eta.len() {
            return bad("block probabilities and block means must have the same nonzero length");
        }
        if self.block_probs.iter().any(|p| !(0.0..=1.0).contains(p))
            || (self.block_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("block probabilities must lie in [0, 1] and sum to 1");
        }
        for q in [self.p_within, self.p_between] {
            if !(0.0..=1.0).contains(&q) {
                return bad("edge probabilities must lie in [0, 1]");
            }
        }
        if !(self.s >= 0.0) || !(self.sigma >= 0.0) {
            return bad("s and sigma must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.censor_fraction) {
            return bad("censored fraction must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn gamma_for(&self, family: Family) -> f64 {
        self.gamma.unwrap_or(match family {
            Family::Linear => 0.0,
            Family::Logistic => DEFAULT_GAMMA_LOGISTIC,
            Family::Cox => DEFAULT_GAMMA_COX,
        })
    }
}

/// Stochastic block model: multinomial labels, independent Bernoulli edges.
pub fn sbm_generate(cfg: &SimConfig, seed: u64) -> Result<(Graph, Vec<usize>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = WeightedIndex::new(&cfg.block_probs)
        .map_err(|e| NetcohError::InvalidParameter(format!("block probabilities: {e}")))?;
    let labels: Vec<usize> = (0..cfg.n).map(|_| dist.sample(&mut rng)).collect();
    let mut edges = Vec::new();
    for i in 0..cfg.n {
        for j in i + 1..cfg.n {
            let q = if labels[i] == labels[j] {
                cfg.p_within
            } else {
                cfg.p_between
            };
            if q > 0.0 && rng.gen_bool(q) {
                edges.push((i, j));
            }
        }
    }
    Ok((Graph::from_unweighted(cfg.n, edges)?, labels))
}

/// Disjoint Erdos-Renyi components of the given sizes.
pub fn er_components_generate(sizes: &[usize], p_edge: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(NetcohError::InvalidParameter(format!(
            "edge probability {p_edge} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = sizes.iter().sum();
    let mut edges = Vec::new();
    let mut start = 0;
    for &sz in sizes {
        for i in start..start + sz {
            for j in i + 1..start + sz {
                if p_edge > 0.0 && rng.gen_bool(p_edge) {
                    edges.push((i, j));
                }
            }
        }
        start += sz;
    }
    Graph::from_unweighted(n, edges)
}

/// Block labels of consecutive components.
pub fn component_labels(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect()
}

/// The expected adjacency of [`er_components_generate`]: complete components
/// with every edge weighted `p_edge`.
pub fn expected_components_graph(sizes: &[usize], p_edge: f64) -> Result<Graph> {
    let labels = component_labels(sizes);
    let n = labels.len();
    let rows = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| labels[i] == labels[j]);
    Graph::from_edges(n, rows.map(|(i, j)| (i, j, p_edge)))
}

/// Dense weighted block graph: every pair is linked, with weight `w_within`
/// inside a block and `w_between` across blocks. Blocks are consecutive and of
/// (nearly) equal size.
pub fn dense_block_graph(
    n: usize,
    blocks: usize,
    w_within: f64,
    w_between: f64,
) -> Result<(Graph, Vec<usize>)> {
    let labels: Vec<usize> = (0..n).map(|i| i * blocks / n).collect();
    let rows: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            (
                i,
                j,
                if labels[i] == labels[j] {
                    w_within
                } else {
                    w_between
                },
            )
        })
        .collect();
    Ok((Graph::from_edges(n, rows)?, labels))
}

/// Uniform random graph with `m` distinct edges.
pub fn random_graph(n: usize, m: usize, seed: u64) -> Result<Graph> {
    let max = n * n.saturating_sub(1) / 2;
    if m > max {
        return Err(NetcohError::InvalidParameter(format!(
            "{m} edges do not fit on {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        }
    }
    Graph::from_unweighted(n, edges)
}

/// Standard normal design, standardized.
pub fn gen_design(n: usize, p: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let raw = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng));
    if p == 0 {
        return Ok(raw);
    }
    Ok(standardize(&raw)?.0)
}

/// A simulated data set with its generating parameters.
#[derive(Debug, Clone)]
pub struct SimData {
    pub x: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub response: Response,
    /// `alpha + X beta`.
    pub linear_predictor: Vec<f64>,
}

/// Draws `alpha_i ~ N(eta_{c_i}, s^2)`, `beta_j ~ N(1, 1)`, a standardized
/// normal design and a response of the given family. Survival times are
/// exponential with rate `exp(alpha + X beta)` and censored by an independent
/// `Uniform(0, tau)` with `tau` set for the configured censored fraction.
pub fn gen_data(cfg: &SimConfig, labels: &[usize], family: Family, seed: u64) -> Result<SimData> {
    cfg.validate()?;
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha: Vec<f64> = labels
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(&mut rng);
            cfg.eta[c] + cfg.s * z
        })
        .collect();
    let beta_dist = Normal::new(1.0, 1.0).expect("valid normal");
    let beta: Vec<f64> = (0..cfg.p).map(|_| beta_dist.sample(&mut rng)).collect();
    let x = gen_design(n, cfg.p, &mut rng)?;
    let xb = &x * DVector::from_column_slice(&beta);
    let lp: Vec<f64> = alpha.iter().zip(xb.iter()).map(|(a, b)| a + b).collect();
    let response = match family {
        Family::Linear => Response::Continuous(
            lp.iter()
                .map(|m| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    m + cfg.sigma * e
                })
                .collect(),
        ),
        Family::Logistic => Response::Binary(
            lp.iter()
                .map(|&m| if rng.gen_bool(sigmoid(m)) { 1.0 } else { 0.0 })
                .collect(),
        ),
        Family::Cox => {
            let rates: Vec<f64> = lp.iter().map(|m| m.exp()).collect();
            let tau = censoring_horizon(&rates, cfg.censor_fraction);
            let mut time = Vec::with_capacity(n);
            let mut event = Vec::with_capacity(n);
            for &r in &rates {
                let t: f64 = Exp::new(r).expect("positive rate").sample(&mut rng);
                let c = if tau.is_finite() {
                    Uniform::new(0.0, tau).sample(&mut rng)
                } else {
                    f64::INFINITY
                };
                time.push(t.min(c).max(f64::MIN_POSITIVE));
                event.push(t <= c);
            }
            if !event.iter().any(|e| *e) {
                event[0] = true;
            }
            Response::Survival(SurvivalData::new(time, event)?)
        }
    };
    Ok(SimData {
        x,
        alpha,
        beta,
        response,
        linear_predictor: lp,
    })
}

/// `tau` with mean censoring probability `frac` under `C ~ Uniform(0, tau)`.
/// `P(C < T) = (1 - exp(-r tau)) / (r tau)` for `T ~ Exp(r)`.
fn censoring_horizon(rates: &[f64], frac: f64) -> f64 {
    if frac <= 0.0 {
        return f64::INFINITY;
    }
    let censored = |tau: f64| {
        rates
            .iter()
            .map(|&r| {
                let z = r * tau;
                if z < 1e-8 {
                    1.0 - z / 2.0
                } else {
                    (1.0 - (-z).exp()) / z
                }
            })
            .sum::<f64>()
            / rates.len() as f64
    };
    let (mut lo, mut hi) = (1e-12, 1.0);
    while censored(hi) > frac {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if censored(mid) > frac {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The three-component illustration: 300 nodes in three Erdos-Renyi
/// components of 100 with edge probability 0.05, block means (-1, 0, 1),
/// spread 0.1, two standardized covariates and `lambda = 0.1`.
#[derive(Debug, Clone)]
pub struct Example1 {
    pub graph: Graph,
    pub labels: Vec<usize>,
    pub x: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub sigma: f64,
}

pub const EXAMPLE1_SIZES: [usize; 3] = [100, 100, 100];
pub const EXAMPLE1_EDGE_PROB: f64 = 0.05;

/// Draws the illustration. With `expected` the random components are replaced
/// by their expected adjacency (complete components weighted 0.05).
pub fn example1_instance(seed: u64, expected: bool) -> Result<Example1> {
    let graph = if expected {
        expected_components_graph(&EXAMPLE1_SIZES, EXAMPLE1_EDGE_PROB)?
    } else {
        er_components_generate(&EXAMPLE1_SIZES, EXAMPLE1_EDGE_PROB, derive_seed(seed, 0))?
    };
    let labels = component_labels(&EXAMPLE1_SIZES);
    let cfg = SimConfig {
        n: labels.len(),
        s: 0.1,
        sigma: 0.5,
        p: 2,
        ..SimConfig::default()
    };
    let d = gen_data(&cfg, &labels, Family::Linear, derive_seed(seed, 1))?;
    Ok(Example1 {
        graph,
        labels,
        x: d.x,
        alpha: d.alpha,
        beta: d.beta,
        lambda: 0.1,
        sigma: 0.5,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// OLS for linear responses, ordinary logistic regression for binary ones.
    Baseline,
    Null,
    Rnc,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Baseline, Method::Null, Method::Rnc, Method::Oracle];

    pub fn name(&self, family: Family) -> &'static str {
        match (self, family) {
            (Method::Baseline, Family::Linear) => "ols",
            (Method::Baseline, _) => "logistic",
            (Method::Null, _) => "null",
            (Method::Rnc, _) => "rnc",
            (Method::Oracle, _) => "oracle",
        }
    }
}

/// One row of an experiment table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub family: Family,
    pub s: f64,
    pub replication: usize,
    pub method: String,
    /// Tuned lambda (NaN for untuned methods).
    pub lambda: f64,
    /// `||alpha_hat - alpha||^2 / n`.
    pub mse_alpha: f64,
    /// `||beta_hat - beta||^2`.
    pub mse_beta: f64,
    /// Mean squared error of the fitted means (linear) or probabilities (logistic).
    pub mse_pred: f64,
    pub improvement_alpha: f64,
    pub improvement_beta: f64,
    pub improvement_pred: f64,
    pub error: String,
}

struct Estimate {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    lambda: f64,
}

fn errors(est: &Estimate, data: &SimData, family: Family) -> (f64, f64, f64) {
    let n = data.alpha.len() as f64;
    let ea = est
        .alpha
        .iter()
        .zip(&data.alpha)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n;
    let eb = est
        .beta
        .iter()
        .zip(&data.beta)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>();
    let xb = &data.x * DVector::from_column_slice(&est.beta);
    let ep = est
        .alpha
        .iter()
        .zip(xb.iter())
        .zip(&data.linear_predictor)
        .map(|((a, b), m)| match family {
            Family::Logistic => (sigmoid(a + b) - sigmoid(*m)).powi(2),
            _ => (a + b - m).powi(2),
        })
        .sum::<f64>()
        / n;
    (ea, eb, ep)
}

/// Least squares (or logistic regression) with one intercept per true block.
fn oracle_fit(data: &SimData, labels: &[usize], family: Family) -> Result<Estimate> {
    let n = labels.len();
    let p = data.x.ncols();
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    let k = present.len();
    let mut z = DMatrix::zeros(n, k + p);
    for (i, &c) in labels.iter().enumerate() {
        let col = present.binary_search(&c).expect("label present");
        z[(i, col)] = 1.0;
    }
    z.view_mut((0, k), (n, p)).copy_from(&data.x);
    let coef: Vec<f64> = match (&data.response, family) {
        (Response::Continuous(y), Family::Linear) => {
            let ztz = z.tr_mul(&z);
            let rhs = z.tr_mul(&DVector::from_column_slice(y));
            ztz.cholesky()
                .ok_or_else(|| NetcohError::Singular("oracle design is rank deficient".into()))?
                .solve(&rhs)
                .as_slice()
                .to_vec()
        }
        (Response::Binary(y), Family::Logistic) => dense_newton(&Bernoulli { y }, &z, 1e-9, 100)?.0,
        _ => {
            return Err(NetcohError::InvalidParameter(
                "oracle fit supports linear and logistic data".into(),
            ))
        }
    };
    Ok(Estimate {
        alpha: labels
            .iter()
            .map(|c| coef[present.binary_search(c).expect("label present")])
            .collect(),
        beta: coef[k..].to_vec(),
        lambda: f64::NAN,
    })
}

fn fit_method(
    method: Method,
    family: Family,
    cfg: &SimConfig,
    g: &Graph,
    labels: &[usize],
    data: &SimData,
    seed: u64,
) -> Result<Estimate> {
    let x = &data.x;
    match method {
        Method::Oracle => oracle_fit(data, labels, family),
        Method::Baseline => match &data.response {
            Response::Continuous(y) => {
                let f = ols_fit(x, y)?;
                Ok(Estimate {
                    beta: unstandardize(&f.beta_hat, &f.standardization.scales),
                    alpha: shift_alpha(&f.alpha_hat, &f.beta_hat, &f.standardization),
                    lambda: f64::NAN,
                })
            }
            Response::Binary(y) => {
                let f = fit_plain_logistic(x, y, true)?;
                Ok(Estimate {
                    beta: unstandardize(&f.beta_hat, &f.standardization.scales),
                    alpha: shift_alpha(
                        &vec![f.intercept; y.len()],
                        &f.beta_hat,
                        &f.standardization,
                    ),
                    lambda: f64::NAN,
                })
            }
            Response::Survival(_) => Err(NetcohError::InvalidParameter(
                "survival experiments are not supported".into(),
            )),
        },
        Method::Null | Method::Rnc => {
            let (graph, gamma) = if method == Method::Null {
                (Graph::empty(g.node_count()), 1.0)
            } else {
                (g.clone(), cfg.gamma_for(family))
            };
            let mut cv = CvOptions::new(cfg.cv_folds, seed, gamma);
            cv.solver = SolverOptions::default();
            let report = kfold_cv(x, &data.response, &graph, &cfg.lambda_grid, &cv)?;
            let lambda = report.selected_lambda;
            let (a, b, st) = match &data.response {
                Response::Continuous(y) => {
                    let f = if method == Method::Null {
                        null_model_fit(x, y, lambda, gamma, &SolverOptions::default())?
                    } else {
                        fit_linear(x, y, &graph, lambda, gamma, &SolverOptions::default())?
                    };
                    (f.alpha_hat, f.beta_hat, f.standardization)
                }
                Response::Binary(y) => {
                    let f =
                        fit_logistic(x, y, &graph, lambda, gamma, &NewtonOptions::default(), None)?;
                    (f.alpha_hat, f.beta_hat, f.standardization)
                }
                Response::Survival(_) => {
                    return Err(NetcohError::InvalidParameter(
                        "survival experiments are not supported".into(),
                    ))
                }
            };
            Ok(Estimate {
                beta: unstandardize(&b, &st.scales),
                alpha: shift_alpha(&a, &b, &st),
                lambda,
            })
        }
    }
}

/// The design is standardized already, so the stored transform is the identity
/// up to rounding; map coefficients back exactly anyway.
fn unstandardize(beta: &[f64], scales: &[f64]) -> Vec<f64> {
    beta.iter().zip(scales).map(|(b, s)| b / s).collect()
}

fn shift_alpha(alpha: &[f64], beta: &[f64], st: &crate::standardize::Standardization) -> Vec<f64> {
    let (_, offset) = st.unscale(beta);
    alpha.iter().map(|a| a - offset).collect()
}

/// Runs every method on `replications` draws for each `s` in `s_grid`.
/// Improvements are relative to the baseline of the same draw. Failures are
/// recorded in the `error` column.
pub fn run_experiment(
    cfg: &SimConfig,
    family: Family,
    methods: &[Method],
    s_grid: &[f64],
) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    if family == Family::Cox {
        return Err(NetcohError::InvalidParameter(
            "experiments support linear and logistic families".into(),
        ));
    }
    let cells: Vec<(usize, usize)> = (0..s_grid.len())
        .flat_map(|i| (0..cfg.replications).map(move |r| (i, r)))
        .collect();
    let blocks: Vec<Result<Vec<ExperimentRow>>> = cells
        .par_iter()
        .map(|&(si, rep)| {
            let s = s_grid[si];
            let cell_seed = derive_seed(cfg.seed, (si as u64) << 32 | rep as u64);
            let mut c = cfg.clone();
            c.s = s;
            let (g, labels) = sbm_generate(&c, derive_seed(cell_seed, 0))?;
            let data = gen_data(&c, &labels, family, derive_seed(cell_seed, 1))?;
            let base = fit_method(Method::Baseline, family, &c, &g, &labels, &data, 0)
                .map(|e| errors(&e, &data, family));
            let mut rows = Vec::new();
            for (mi, &m) in methods.iter().enumerate() {
                let res = if m == Method::Baseline {
                    base.as_ref()
                        .map(|v| (*v, f64::NAN))
                        .map_err(|e| NetcohError::InvalidInput(e.to_string()))
                } else {
                    fit_method(
                        m,
                        family,
                        &c,
                        &g,
                        &labels,
                        &data,
                        derive_seed(cell_seed, 2 + mi as u64),
                    )
                    .map(|e| (errors(&e, &data, family), e.lambda))
                };
                let row = match (&res, &base) {
                    (Ok(((ea, eb, ep), lam)), Ok((ba, bb, bp))) => ExperimentRow {
                        family,
                        s,
                        replication: rep,
                        method: m.name(family).into(),
                        lambda: *lam,
                        mse_alpha: *ea,
                        mse_beta: *eb,
                        mse_pred: *ep,
                        improvement_alpha: 1.0 - ea / ba,
                        improvement_beta: 1.0 - eb / bb,
                        improvement_pred: 1.0 - ep / bp,
                        error: String::new(),
                    },
                    (r, b) => {
                        let msg = match (r, b) {
                            (Err(e), _) => e.to_string(),
                            (_, Err(e)) => format!("baseline failed: {e}"),
                            _ => unreachable!(),
                        };
                        log::warn!("s = {s}, replication {rep}, {}: {msg}", m.name(family));
                        ExperimentRow {
                            family,
                            s,
                            replication: rep,
                            method: m.name(family).into(),
                            lambda: f64::NAN,
                            mse_alpha: f64::NAN,
                            mse_beta: f64::NAN,
                            mse_pred: f64::NAN,
                            improvement_alpha: f64::NAN,
                            improvement_beta: f64::NAN,
                            improvement_pred: f64::NAN,
                            error: msg,
                        }
                    }
                };
                rows.push(row);
            }
            Ok(rows)
        })
        .collect();
    let mut out = Vec::new();
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}

/// Mean improvements `(alpha, beta, pred)` of `method` at `s`, over successful rows.
pub fn mean_improvements(rows: &[ExperimentRow], method: &str, s: f64) -> (f64, f64, f64, usize) {
    let sel: Vec<&ExperimentRow> = rows
        .iter()
        .filter(|r| r.method == method && r.s == s && r.error.is_empty())
        .collect();
    let k = sel.len().max(1) as f64;
    (
        sel.iter().map(|r| r.improvement_alpha).sum::<f64>() / k,
        sel.iter().map(|r| r.improvement_beta).sum::<f64>() / k,
        sel.iter().map(|r| r.improvement_pred).sum::<f64>() / k,
        sel.len(),
    )
}

/// Oversampling used by the sparsification experiment. Much smaller than the
/// library default so that a 300-node graph actually loses edges.
pub const EXPERIMENT_OVERSAMPLING: f64 = 0.6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparsifyExperimentConfig {
    pub n: usize,
    pub blocks: usize,
    pub w_within: f64,
    pub w_between: f64,
    pub eta: Vec<f64>,
    pub s: f64,
    pub sigma: f64,
    pub p: usize,
    pub lambda: f64,
    pub oversampling: f64,
    pub seed: u64,
    pub replications: usize,
}

impl Default for SparsifyExperimentConfig {
    fn default() -> Self {
        Self {
            n: 300,
            blocks: 3,
            w_within: 1.0,
            w_between: 0.1,
            eta: vec![-1.0, 0.0, 1.0],
            s: 0.1,
            sigma: 0.5,
            p: 2,
            lambda: 0.1,
            oversampling: EXPERIMENT_OVERSAMPLING,
            seed: 0,
            replications: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparsifyRow {
    pub epsilon: f64,
    pub replication: usize,
    pub edges_kept: usize,
    /// Fraction of off-diagonal adjacency entries that are zero after sparsification.
    pub zero_fraction: f64,
    pub measured_epsilon: f64,
    pub observed_sq_diff: f64,
    /// Min-form bound evaluated at the measured epsilon.
    pub bound_eq17: f64,
    /// Linear-model bound evaluated at the measured epsilon.
    pub bound_eq19: f64,
    /// Linear-model bound evaluated at the target epsilon.
    pub bound_eq19_target: f64,
    /// `1 - MSE(alpha*) / MSE(alpha_hat)`.
    pub improvement_alpha: f64,
    pub improvement_beta: f64,
}

/// Fits the linear RNC estimator on a dense block graph and on its sparsifiers.
pub fn sparsification_experiment(
    cfg: &SparsifyExperimentConfig,
    epsilon_grid: &[f64],
) -> Result<Vec<SparsifyRow>> {
    if cfg.eta.len() != cfg.blocks {
        return Err(NetcohError::InvalidParameter(
            "need one block mean per block".into(),
        ));
    }
    let (g, labels) = dense_block_graph(cfg.n, cfg.blocks, cfg.w_within, cfg.w_between)?;
    let l = laplacian(&g, 0.0)?;
    let sim = SimConfig {
        n: cfg.n,
        block_probs: vec![1.0 / cfg.blocks as f64; cfg.blocks],
        eta: cfg.eta.clone(),
        s: cfg.s,
        sigma: cfg.sigma,
        p: cfg.p,
        ..SimConfig::default()
    };
    let pairs = (cfg.n * (cfg.n - 1) / 2) as f64;
    let opts = SolverOptions::with_tol(1e-12);
    let mut rows = Vec::new();
    for rep in 0..cfg.replications {
        let seed = derive_seed(cfg.seed, rep as u64);
        let data = gen_data(&sim, &labels, Family::Linear, derive_seed(seed, 0))?;
        let Response::Continuous(y) = &data.response else {
            unreachable!()
        };
        let fit = fit_linear(&data.x, y, &g, cfg.lambda, 0.0, &opts)?;
        let m_strong = linear_strong_convexity(&data.x, &l, cfg.lambda)?;
        let mse = |a: &[f64], b: &[f64], sa: &[f64], sb: &[f64]| -> (f64, f64) {
            (
                a.iter().zip(sa).map(|(x, y)| (x - y).powi(2)).sum(),
                b.iter().zip(sb).map(|(x, y)| (x - y).powi(2)).sum(),
            )
        };
        let (ma, mb) = mse(&fit.alpha_hat, &fit.beta_hat, &data.alpha, &data.beta);
        for (ei, &eps) in epsilon_grid.iter().enumerate() {
            let sp = spectral_sparsify(
                &g,
                eps,
                derive_seed(seed, 1 + ei as u64),
                &SparsifyOptions {
                    oversampling: cfg.oversampling,
                    verify: true,
                },
            )?;
            let cert = sp.certificate.expect("verification requested");
            let l_star = laplacian(&sp.graph_star, 0.0)?;
            let fit_star = fit_linear(&data.x, y, &sp.graph_star, cfg.lambda, 0.0, &opts)?;
            let (sa, sb) = mse(
                &fit_star.alpha_hat,
                &fit_star.beta_hat,
                &data.alpha,
                &data.beta,
            );
            let certified = cert.measured_epsilon.max(1e-300);
            let (b17, b19, obs) = if certified < 0.5 {
                let b = sparsification_bound(
                    &fit.alpha_hat,
                    &fit.beta_hat,
                    &fit_star.alpha_hat,
                    &fit_star.beta_hat,
                    &l,
                    &l_star,
                    cfg.lambda,
                    certified,
                    m_strong,
                )?;
                (b.bound_eq17, b.bound_eq19, b.observed_sq_diff)
            } else {
                let obs = fit
                    .alpha_hat
                    .iter()
                    .zip(&fit_star.alpha_hat)
                    .chain(fit.beta_hat.iter().zip(&fit_star.beta_hat))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                (f64::NAN, f64::NAN, obs)
            };
            let pen = crate::graph::cohesion_penalty(&l, &fit.alpha_hat)?;
            rows.push(SparsifyRow {
                epsilon: eps,
                replication: rep,
                edges_kept: sp.edges_kept,
                zero_fraction: 1.0 - sp.edges_kept as f64 / pairs,
                measured_epsilon: cert.measured_epsilon,
                observed_sq_diff: obs,
                bound_eq17: b17,
                bound_eq19: b19,
                bound_eq19_target: 4.0 * eps * cfg.lambda * pen / m_strong,
                improvement_alpha: 1.0 - sa / ma,
                improvement_beta: 1.0 - sb / mb,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::connected_components;

    #[test]
    fn sbm_extremes() {
        let mut cfg = SimConfig {
            n: 20,
            p_within: 0.0,
            p_between: 0.0,
            ..SimConfig::default()
        };
        assert_eq!(sbm_generate(&cfg, 1).unwrap().0.edge_count(), 0);
        cfg.p_within = 1.0;
        cfg.p_between = 1.0;
        cfg.block_probs = vec![1.0];
        cfg.eta = vec![0.0];
        assert_eq!(sbm_generate(&cfg, 1).unwrap().0.edge_count(), 190);
    }

    #[test]
    fn er_extremes() {
        let g = er_components_generate(&[4, 5], 0.0, 3).unwrap();
        assert_eq!(connected_components(&g), (0..9).collect::<Vec<_>>());
        let g = er_components_generate(&[4, 5], 1.0, 3).unwrap();
        assert_eq!(g.edge_count(), 6 + 10);
        assert_eq!(connected_components(&g), component_labels(&[4, 5]));
    }

    #[test]
    fn generators_are_seeded() {
        let cfg = SimConfig {
            n: 60,
            ..SimConfig::default()
        };
        let (g1, l1) = sbm_generate(&cfg, 7).unwrap();
        let (g2, l2) = sbm_generate(&cfg, 7).unwrap();
        assert_eq!(g1.edges(), g2.edges());
        assert_eq!(l1, l2);
        let d1 = gen_data(&cfg, &l1, Family::Linear, 3).unwrap();
        let d2 = gen_data(&cfg, &l1, Family::Linear, 3).unwrap();
        assert_eq!(d1.x, d2.x);
        assert_eq!(d1.response, d2.response);
    }

    #[test]
    fn censoring_fraction_is_hit_in_expectation() {
        let rates = vec![0.5, 1.0, 2.0, 4.0];
        let tau = censoring_horizon(&rates, 0.3);
        let frac: f64 = rates
            .iter()
            .map(|r| (1.0 - (-r * tau).exp()) / (r * tau))
            .sum::<f64>()
            / 4.0;
        assert!((frac - 0.3).abs() < 1e-9);
    }

    #[test]
    fn dense_block_graph_is_complete() {
        let (g, labels) = dense_block_graph(9, 3, 1.0, 0.1).unwrap();
        assert_eq!(g.edge_count(), 36);
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
        assert_eq!(g.weight(0, 1), Some(1.0));
        assert_eq!(g.weight(0, 3), Some(0.1));
    }
}
