//! Spectral sparsification by effective-resistance sampling.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NetcohError, Result};
use crate::graph::{component_members, connected_components, laplacian, Graph, Laplacian};
use crate::solver::MAX_DENSE;

/// Default oversampling constant in `q = C n ln(n) / eps^2`.
pub const DEFAULT_OVERSAMPLING: f64 = 9.0;

/// Effective resistance of every edge, in the order of `g.edges()`. Computed
/// exactly per connected component from the inverse of `L_c + 11'/n_c`.
pub fn effective_resistances(g: &Graph) -> Result<Vec<f64>> {
    let labels = connected_components(g);
    let comps = component_members(&labels);
    let mut pos = vec![0usize; g.node_count()];
    for c in &comps {
        for (i, &v) in c.iter().enumerate() {
            pos[v] = i;
        }
    }
    if let Some(big) = comps.iter().map(|c| c.len()).max() {
        if big > MAX_DENSE {
            return Err(NetcohError::TooLarge {
                size: big,
                limit: MAX_DENSE,
            });
        }
    }
    let inverses: Vec<Option<DMatrix<f64>>> = comps
        .par_iter()
        .map(|c| {
            if c.len() < 2 {
                return Ok(None);
            }
            let sub = g.induced_subgraph(c)?;
            let k = c.len();
            let m = laplacian(&sub, 0.0)?.to_dense().add_scalar(1.0 / k as f64);
            let chol = m.cholesky().ok_or_else(|| {
                NetcohError::Singular("component Laplacian plus 11'/n is singular".into())
            })?;
            Ok(Some(chol.inverse()))
        })
        .collect::<Result<_>>()?;
    Ok(g.edges()
        .iter()
        .map(|e| {
            let k = inverses[labels[e.u]]
                .as_ref()
                .expect("edge inside a component of size >= 2");
            let (a, b) = (pos[e.u], pos[e.v]);
            k[(a, a)] + k[(b, b)] - 2.0 * k[(a, b)]
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verified: bool,
    pub measured_epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct SparsifyResult {
    pub graph_star: Graph,
    pub epsilon_target: f64,
    pub edges_input: usize,
    pub edges_kept: usize,
    /// Total number of edge samples drawn.
    pub samples: usize,
    pub certificate: Option<Certificate>,
}

#[derive(Debug, Clone, Copy)]
pub struct SparsifyOptions {
    pub oversampling: f64,
    pub verify: bool,
}

impl Default for SparsifyOptions {
    fn default() -> Self {
        Self {
            oversampling: DEFAULT_OVERSAMPLING,
            verify: false,
        }
    }
}

/// Samples `q = ceil(C n ln(n) / eps^2)` edges with replacement per connected
/// component, with probability proportional to `w_e R_e`, and gives each
/// sampled edge weight `w_e / (q p_e)` per draw.
pub fn spectral_sparsify(
    g: &Graph,
    epsilon: f64,
    seed: u64,
    opts: &SparsifyOptions,
) -> Result<SparsifyResult> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(NetcohError::InvalidParameter(format!(
            "epsilon must lie in (0, 1/2), got {epsilon}"
        )));
    }
    if !(opts.oversampling > 0.0) {
        return Err(NetcohError::InvalidParameter(
            "oversampling constant must be positive".into(),
        ));
    }
    let res = effective_resistances(g)?;
    let labels = connected_components(g);
    let comps = component_members(&labels);
    let mut by_comp: Vec<Vec<usize>> = vec![Vec::new(); comps.len()];
    for (k, e) in g.edges().iter().enumerate() {
        by_comp[labels[e.u]].push(k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut new_w = vec![0.0; g.edge_count()];
    let mut samples = 0;
    for (c, edges) in by_comp.iter().enumerate() {
        if edges.is_empty() {
            continue;
        }
        let nc = comps[c].len() as f64;
        let q = (opts.oversampling * nc * nc.ln() / (epsilon * epsilon))
            .ceil()
            .max(1.0) as usize;
        let scores: Vec<f64> = edges.iter().map(|&k| g.edges()[k].w * res[k]).collect();
        let total: f64 = scores.iter().sum();
        let dist = WeightedIndex::new(&scores)
            .map_err(|e| NetcohError::InvalidInput(format!("sampling weights: {e}")))?;
        let mut counts = vec![0usize; edges.len()];
        for _ in 0..q {
            counts[dist.sample(&mut rng)] += 1;
        }
        for (i, &k) in edges.iter().enumerate() {
            if counts[i] > 0 {
                let pe = scores[i] / total;
                new_w[k] = g.edges()[k].w * counts[i] as f64 / (q as f64 * pe);
            }
        }
        samples += q;
    }
    let rows: Vec<(usize, usize, f64)> = g
        .edges()
        .iter()
        .zip(&new_w)
        .filter(|(_, w)| **w > 0.0)
        .map(|(e, w)| (e.u, e.v, *w))
        .collect();
    let kept = rows.len();
    let graph_star = Graph::from_edges(g.node_count(), rows)?;
    let certificate = if opts.verify {
        let (verified, measured) =
            verify_spectral_approx(&laplacian(g, 0.0)?, &laplacian(&graph_star, 0.0)?, epsilon)?;
        Some(Certificate {
            verified,
            measured_epsilon: measured,
        })
    } else {
        None
    };
    Ok(SparsifyResult {
        graph_star,
        epsilon_target: epsilon,
        edges_input: g.edge_count(),
        edges_kept: kept,
        samples,
        certificate,
    })
}

/// Checks `(1 - eps) L <= L* <= (1 + eps) L`. The measured epsilon is the
/// largest `|mu - 1|` over generalized eigenvalues `L* x = mu L x` on the range
/// of `L`; it is infinite if `L*` acts on the null space of `L`.
pub fn verify_spectral_approx(
    l: &Laplacian,
    l_star: &Laplacian,
    epsilon: f64,
) -> Result<(bool, f64)> {
    let n = l.dim();
    if l_star.dim() != n {
        return Err(NetcohError::DimensionMismatch {
            expected: n,
            found: l_star.dim(),
        });
    }
    if n > MAX_DENSE {
        return Err(NetcohError::TooLarge {
            size: n,
            limit: MAX_DENSE,
        });
    }
    if n == 0 {
        return Ok((true, 0.0));
    }
    let eig = SymmetricEigen::new(l.to_dense());
    let lmax = eig.eigenvalues.amax();
    let ls = l_star.to_dense();
    let tol = 1e-9 * lmax.max(1.0);
    let range: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > tol).collect();
    let null: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= tol).collect();
    if !null.is_empty() {
        let z = eig.eigenvectors.select_columns(&null);
        let leak = (&ls * &z).amax();
        if leak > 1e-8 * ls.amax().max(1.0) {
            return Ok((false, f64::INFINITY));
        }
    }
    if range.is_empty() {
        return Ok((true, 0.0));
    }
    let mut u = eig.eigenvectors.select_columns(&range);
    for (k, &i) in range.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        u.column_mut(k).scale_mut(s);
    }
    let b = u.tr_mul(&(&ls * &u));
    let b = (&b + b.transpose()) * 0.5;
    let mu = SymmetricEigen::new(b).eigenvalues;
    let measured = mu.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    Ok((measured <= epsilon, measured))
}
