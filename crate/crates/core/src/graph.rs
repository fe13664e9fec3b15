//! Weighted undirected graphs, their (ridge-regularized) Laplacians and the
//! cohesion penalty `alpha' (L + gamma I) alpha`.

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NetcohError, Result};
use crate::sparse::CsrMatrix;

/// An undirected edge with `u < v` and a strictly positive weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Weighted undirected graph on nodes `0..n`.
///
/// No self-loops, at most one edge per unordered pair, all weights positive.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    adj_ptr: Vec<usize>,
    adj: Vec<(usize, f64)>,
}

impl Graph {
    /// Builds a graph from `(u, v, w)` rows. Rows with zero weight are dropped;
    /// self-loops, out-of-range ids, negative or non-finite weights and repeated
    /// pairs are rejected.
    pub fn from_edges(
        n: usize,
        rows: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut edges = Vec::new();
        for (u, v, w) in rows {
            for id in [u, v] {
                if id >= n {
                    return Err(NetcohError::NodeOutOfRange { id, n });
                }
            }
            if u == v {
                return Err(NetcohError::SelfLoop(u));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(NetcohError::InvalidWeight { u, v, weight: w });
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if !seen.insert((a, b)) {
                return Err(NetcohError::DuplicateEdge(a, b));
            }
            if w == 0.0 {
                continue;
            }
            edges.push(Edge { u: a, v: b, w });
        }
        edges.sort_by_key(|x| (x.u, x.v));
        Ok(Self::from_sorted_edges(n, edges))
    }

    /// Unit-weight convenience constructor.
    pub fn from_unweighted(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        Self::from_edges(n, pairs.into_iter().map(|(u, v)| (u, v, 1.0)))
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sorted_edges(n, Vec::new())
    }

    fn from_sorted_edges(n: usize, edges: Vec<Edge>) -> Self {
        let mut deg = vec![0usize; n];
        for e in &edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        let mut adj_ptr = vec![0usize; n + 1];
        for i in 0..n {
            adj_ptr[i + 1] = adj_ptr[i] + deg[i];
        }
        let mut fill = adj_ptr.clone();
        let mut adj = vec![(0usize, 0.0); adj_ptr[n]];
        for e in &edges {
            adj[fill[e.u]] = (e.v, e.w);
            fill[e.u] += 1;
            adj[fill[e.v]] = (e.u, e.w);
            fill[e.v] += 1;
        }
        for i in 0..n {
            adj[adj_ptr[i]..adj_ptr[i + 1]].sort_by_key(|&(j, _)| j);
        }
        Self {
            n,
            edges,
            adj_ptr,
            adj,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `v` with edge weights, sorted by id.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[self.adj_ptr[v]..self.adj_ptr[v + 1]]
    }

    /// Weighted degree `d_v = sum_u w(u, v)`.
    pub fn degree(&self, v: usize) -> f64 {
        self.neighbors(v).iter().map(|&(_, w)| w).sum()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let nb = self.neighbors(u);
        nb.binary_search_by_key(&v, |&(j, _)| j)
            .ok()
            .map(|k| nb[k].1)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    /// Subgraph induced by `nodes`; node `nodes[i]` becomes node `i`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut pos = vec![usize::MAX; self.n];
        for (i, &v) in nodes.iter().enumerate() {
            if v >= self.n {
                return Err(NetcohError::NodeOutOfRange { id: v, n: self.n });
            }
            if pos[v] != usize::MAX {
                return Err(NetcohError::InvalidInput(format!("node {v} listed twice")));
            }
            pos[v] = i;
        }
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| pos[e.u] != usize::MAX && pos[e.v] != usize::MAX)
            .map(|e| {
                let (a, b) = (pos[e.u], pos[e.v]);
                Edge {
                    u: a.min(b),
                    v: a.max(b),
                    w: e.w,
                }
            })
            .collect();
        edges.sort_by_key(|x| (x.u, x.v));
        Ok(Graph::from_sorted_edges(nodes.len(), edges))
    }

    /// Dense adjacency matrix.
    pub fn adjacency_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.u, e.v)] = e.w;
            a[(e.v, e.u)] = e.w;
        }
        a
    }
}

/// Sparse symmetric Laplacian `D - A + ridge * I`.
#[derive(Debug, Clone)]
pub struct Laplacian {
    matrix: CsrMatrix,
    ridge: f64,
}

impl Laplacian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal()
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.mul_vec_into(x, y);
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }

    /// Largest eigenvalue bound via Gershgorin: `max_v (2 d_v + ridge)`.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.matrix.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Builds `L = D - A + gamma I` in sparse form.
pub fn laplacian(g: &Graph, gamma: f64) -> Result<Laplacian> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(NetcohError::InvalidParameter(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    let n = g.node_count();
    let mut trips = Vec::with_capacity(n + 2 * g.edge_count());
    for v in 0..n {
        let d = g.degree(v) + gamma;
        if d != 0.0 {
            trips.push((v, v, d));
        }
        for &(u, w) in g.neighbors(v) {
            trips.push((v, u, -w));
        }
    }
    Ok(Laplacian {
        matrix: CsrMatrix::from_triplets(n, n, trips),
        ridge: gamma,
    })
}

fn check_len(l: &Laplacian, alpha: &[f64]) -> Result<()> {
    if alpha.len() != l.dim() {
        return Err(NetcohError::DimensionMismatch {
            expected: l.dim(),
            found: alpha.len(),
        });
    }
    Ok(())
}

/// `alpha' L alpha`, evaluated as `sum_edges w (a_u - a_v)^2 + sum_v r_v a_v^2`
/// where `r_v` is the row sum (the ridge), so the result is never negative.
pub fn cohesion_penalty(l: &Laplacian, alpha: &[f64]) -> Result<f64> {
    check_len(l, alpha)?;
    let m = l.matrix();
    let mut total = 0.0;
    for i in 0..l.dim() {
        let mut row_sum = 0.0;
        for (j, v) in m.row(i) {
            row_sum += v;
            if j > i {
                let d = alpha[i] - alpha[j];
                total += -v * d * d;
            }
        }
        total += row_sum * alpha[i] * alpha[i];
    }
    Ok(total.max(0.0))
}

/// The cohesion gradient `L alpha`.
pub fn cohesion_gradient(l: &Laplacian, alpha: &[f64]) -> Result<Vec<f64>> {
    check_len(l, alpha)?;
    let mut out = vec![0.0; l.dim()];
    l.apply_into(alpha, &mut out);
    Ok(out)
}

/// Connected component label for every node. Labels are numbered in order of
/// each component's smallest node id.
pub fn connected_components(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &(u, _) in g.neighbors(v) {
                if label[u] == usize::MAX {
                    label[u] = next;
                    queue.push_back(u);
                }
            }
        }
        next += 1;
    }
    label
}

/// Groups node ids by component label.
pub fn component_members(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); k];
    for (v, &c) in labels.iter().enumerate() {
        out[c].push(v);
    }
    out
}

/// Laplacian blocks of an enlarged graph with the held-out nodes first.
#[derive(Debug, Clone)]
pub struct LaplacianBlocks {
    /// Held-out node ids (sorted); row `i` of `l11`/`l12` is `test_ids[i]`.
    pub test_ids: Vec<usize>,
    /// Training node ids (sorted); column `j` of `l12` is `train_ids[j]`.
    pub train_ids: Vec<usize>,
    pub l11: CsrMatrix,
    pub l12: CsrMatrix,
    pub l22: CsrMatrix,
}

/// Partitions the (unregularized) Laplacian of `g` into test/train blocks.
pub fn split_for_prediction(g: &Graph, test_ids: &[usize]) -> Result<LaplacianBlocks> {
    if test_ids.is_empty() {
        return Err(NetcohError::InvalidInput("no held-out nodes given".into()));
    }
    let n = g.node_count();
    let mut is_test = vec![false; n];
    for &t in test_ids {
        if t >= n {
            return Err(NetcohError::NodeOutOfRange { id: t, n });
        }
        is_test[t] = true;
    }
    let mut pos = vec![0usize; n];
    let mut tests = Vec::new();
    let mut trains = Vec::new();
    for v in 0..n {
        if is_test[v] {
            pos[v] = tests.len();
            tests.push(v);
        } else {
            pos[v] = trains.len();
            trains.push(v);
        }
    }
    let mut t11 = Vec::new();
    let mut t12 = Vec::new();
    let mut t22 = Vec::new();
    for v in 0..n {
        let d = g.degree(v);
        if is_test[v] {
            t11.push((pos[v], pos[v], d));
        } else {
            t22.push((pos[v], pos[v], d));
        }
        for &(u, w) in g.neighbors(v) {
            match (is_test[v], is_test[u]) {
                (true, true) => t11.push((pos[v], pos[u], -w)),
                (true, false) => t12.push((pos[v], pos[u], -w)),
                (false, false) => t22.push((pos[v], pos[u], -w)),
                (false, true) => {}
            }
        }
    }
    Ok(LaplacianBlocks {
        l11: CsrMatrix::from_triplets(tests.len(), tests.len(), t11),
        l12: CsrMatrix::from_triplets(tests.len(), trains.len(), t12),
        l22: CsrMatrix::from_triplets(trains.len(), trains.len(), t22),
        test_ids: tests,
        train_ids: trains,
    })
}
