//! Preconditioned conjugate gradients for SDD systems and the block-elimination
//! scheme that reduces the `(n + p)` RNC normal equations to `p + 1` sparse
//! solves plus a dense `p x p` Cholesky.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NetcohError, Result};
use crate::graph::Laplacian;
use crate::sparse::CsrMatrix;

/// Largest number of covariates the dense Schur step accepts.
pub const MAX_P: usize = 1000;
/// Largest `n + p` the dense oracle accepts.
pub const MAX_DENSE: usize = 5000;

/// A symmetric linear map given only through matrix-vector products.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }

    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

impl SolveReport {
    fn trivial() -> Self {
        Self {
            iterations: 0,
            final_residual: 0.0,
            converged: true,
        }
    }

    /// Combines reports of several solves: iterations add up, the worst residual wins.
    pub fn merge(&self, other: &SolveReport) -> SolveReport {
        SolveReport {
            iterations: self.iterations + other.iterations,
            final_residual: self.final_residual.max(other.final_residual),
            converged: self.converged && other.converged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual tolerance of each sparse solve.
    pub tol: f64,
    /// Iteration cap per solve; `None` means `10 n`.
    pub max_iter: Option<usize>,
    pub jacobi: bool,
    /// One step of iterative refinement on the full block system.
    pub refine: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            jacobi: true,
            refine: true,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn iter_cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradients on an SPD operator, optionally Jacobi-preconditioned and
/// warm-started. Convergence is judged on the recomputed true residual.
pub fn pcg(
    op: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    jacobi: bool,
) -> (Vec<f64>, SolveReport) {
    let n = op.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return (vec![0.0; n], SolveReport::trivial());
    }
    let inv_diag: Vec<f64> = if jacobi {
        op.diagonal()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect()
    } else {
        vec![1.0; n]
    };
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut rel;
    // A few restarts from the true residual guard against recurrence drift.
    for _restart in 0..4 {
        op.apply(&x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol || iterations >= max_iter {
            return (
                x,
                SolveReport {
                    iterations,
                    final_residual: rel,
                    converged: rel <= tol,
                },
            );
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                break;
            }
            let step = rz / pap;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            iterations += 1;
            if norm(&r) / bnorm <= 0.5 * tol {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    op.apply(&x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    rel = norm(&r) / bnorm;
    (
        x,
        SolveReport {
            iterations,
            final_residual: rel,
            converged: rel <= tol,
        },
    )
}

/// Solves `S x = b` for a sparse symmetric positive definite `S` with Jacobi PCG.
pub fn pcg_solve(
    s: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    if s.nrows() != s.ncols() || b.len() != s.nrows() {
        return Err(NetcohError::DimensionMismatch {
            expected: s.nrows(),
            found: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(NetcohError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    s.check_symmetric(1e-12)?;
    Ok(pcg(s, b, None, tol, max_iter, true))
}

/// The data-curvature block `H` of a (possibly reweighted) RNC system.
#[derive(Clone, Copy)]
pub enum Curvature<'a> {
    /// Least squares: `H = I`.
    Identity,
    /// IRLS weights: `H = diag(w)`.
    Diagonal(&'a [f64]),
    /// Matrix-free symmetric PSD curvature (Cox Hessian).
    Operator(&'a dyn LinearOperator),
}

impl Curvature<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Curvature::Identity => y.copy_from_slice(x),
            Curvature::Diagonal(w) => {
                for i in 0..x.len() {
                    y[i] = w[i] * x[i];
                }
            }
            Curvature::Operator(op) => op.apply(x, y),
        }
    }

    fn diagonal(&self, n: usize) -> Vec<f64> {
        match self {
            Curvature::Identity => vec![1.0; n],
            Curvature::Diagonal(w) => w.to_vec(),
            Curvature::Operator(op) => op.diagonal(),
        }
    }
}

/// `H + lambda L` as an operator.
struct TopLeft<'a> {
    l: &'a CsrMatrix,
    lambda: f64,
    h: Curvature<'a>,
}

impl LinearOperator for TopLeft<'_> {
    fn dim(&self) -> usize {
        self.l.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.h.apply(x, y);
        let m = self.l;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, v) in m.row(i) {
                acc += v * x[j];
            }
            *yi += self.lambda * acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.h.diagonal(self.dim());
        for (di, li) in d.iter_mut().zip(self.l.diagonal()) {
            *di += self.lambda * li;
        }
        d
    }
}

/// Solution of a block system together with the solver diagnostics.
#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub report: SolveReport,
}

/// Solves
///
/// ```text
/// [ H + lambda L   H X   ] [a1]   [b1]
/// [ X'H            X'H X ] [a2] = [b2]
/// ```
///
/// by sparse solves with `H + lambda L` for `b1` and every column of `H X`,
/// a dense Cholesky of the Schur complement `X'H X - X'H (H + lambda L)^-1 H X`
/// and back-substitution. `L` is expected to already carry its ridge.
pub fn block_eliminate(
    l: &Laplacian,
    x: &DMatrix<f64>,
    lambda: f64,
    h: Curvature<'_>,
    b1: &[f64],
    b2: &[f64],
    opts: &SolverOptions,
) -> Result<BlockSolution> {
    let n = l.dim();
    let p = x.ncols();
    if x.nrows() != n {
        return Err(NetcohError::DimensionMismatch {
            expected: n,
            found: x.nrows(),
        });
    }
    if b1.len() != n || b2.len() != p {
        return Err(NetcohError::DimensionMismatch {
            expected: n + p,
            found: b1.len() + b2.len(),
        });
    }
    if p > MAX_P {
        return Err(NetcohError::TooLarge {
            size: p,
            limit: MAX_P,
        });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(NetcohError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if let Curvature::Diagonal(w) = h {
        if w.len() != n {
            return Err(NetcohError::DimensionMismatch {
                expected: n,
                found: w.len(),
            });
        }
    }
    let op = TopLeft {
        l: l.matrix(),
        lambda,
        h,
    };
    let cap = opts.iter_cap(n);
    let xs = x.as_slice();

    // H X, column by column.
    let hx: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut out = vec![0.0; n];
            h.apply(&xs[j * n..(j + 1) * n], &mut out);
            out
        })
        .collect();

    // Column p is b1; columns 0..p are H X.
    let solves: Vec<(Vec<f64>, SolveReport)> = (0..=p)
        .into_par_iter()
        .map(|j| {
            let rhs = if j == p { b1 } else { hx[j].as_slice() };
            pcg(&op, rhs, None, opts.tol, cap, opts.jacobi)
        })
        .collect();
    let mut report = SolveReport::trivial();
    for (_, r) in &solves {
        report = report.merge(r);
    }
    if p == 0 {
        return Ok(BlockSolution {
            a1: solves[0].0.clone(),
            a2: Vec::new(),
            report,
        });
    }

    // Schur complement S = X'H X - (H X)' Z.
    let mut s = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let xhx = dot(&xs[i * n..(i + 1) * n], &hx[j]);
            let v = xhx - dot(&hx[i], &solves[j].0);
            let w = xhx - dot(&hx[j], &solves[i].0);
            s[(i, j)] = 0.5 * (v + w);
            s[(j, i)] = s[(i, j)];
        }
    }
    let scale = (0..p)
        .map(|i| dot(&xs[i * n..(i + 1) * n], &hx[i]))
        .fold(0.0_f64, f64::max);
    let chol = schur_cholesky(s, scale, opts.tol)?;

    let z = &solves[p].0;
    let back = |z: &[f64], b2: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let rhs = DVector::from_iterator(p, (0..p).map(|j| b2[j] - dot(&hx[j], z)));
        let a2 = chol.solve(&rhs);
        let mut a1 = z.to_vec();
        for j in 0..p {
            let c = a2[j];
            for (a, zj) in a1.iter_mut().zip(&solves[j].0) {
                *a -= c * zj;
            }
        }
        (a1, a2.as_slice().to_vec())
    };
    let (mut a1, mut a2) = back(z, b2);

    if opts.refine {
        let (r1, r2) = block_residual(&op, &hx, xs, n, p, &a1, &a2, b1, b2);
        let (dz, rep) = pcg(&op, &r1, None, opts.tol, cap, opts.jacobi);
        report = report.merge(&rep);
        let (d1, d2) = back(&dz, &r2);
        for (a, d) in a1.iter_mut().zip(&d1) {
            *a += d;
        }
        for (a, d) in a2.iter_mut().zip(&d2) {
            *a += d;
        }
    }
    Ok(BlockSolution { a1, a2, report })
}

#[allow(clippy::too_many_arguments)]
fn block_residual(
    op: &TopLeft<'_>,
    hx: &[Vec<f64>],
    xs: &[f64],
    n: usize,
    p: usize,
    a1: &[f64],
    a2: &[f64],
    b1: &[f64],
    b2: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut r1 = vec![0.0; n];
    op.apply(a1, &mut r1);
    for i in 0..n {
        let mut acc = r1[i];
        for j in 0..p {
            acc += hx[j][i] * a2[j];
        }
        r1[i] = b1[i] - acc;
    }
    let mut r2 = vec![0.0; p];
    for i in 0..p {
        let mut acc = dot(&hx[i], a1);
        for j in 0..p {
            acc += dot(&xs[i * n..(i + 1) * n], &hx[j]) * a2[j];
        }
        r2[i] = b2[i] - acc;
    }
    (r1, r2)
}

fn schur_cholesky(s: DMatrix<f64>, scale: f64, tol: f64) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let thresh = 1e-12_f64.max(100.0 * tol) * scale.max(f64::MIN_POSITIVE);
    let singular = || {
        NetcohError::EstimatorDoesNotExist(
            "the Schur complement of the RNC system is singular, so some direction of X lies in the null space of the penalty"
                .into(),
        )
    };
    let chol = Cholesky::new(s).ok_or_else(singular)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows())
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > thresh) {
        return Err(singular());
    }
    Ok(chol)
}

/// A linear RNC problem: Laplacian (with ridge), standardized design and `lambda`.
#[derive(Debug, Clone, Copy)]
pub struct RncSystem<'a> {
    pub l: &'a Laplacian,
    pub x: &'a DMatrix<f64>,
    pub lambda: f64,
}

impl<'a> RncSystem<'a> {
    /// Checks dimensions, `lambda > 0` and that every column of `x` has mean 0
    /// and (population) variance 1.
    pub fn new(l: &'a Laplacian, x: &'a DMatrix<f64>, lambda: f64) -> Result<Self> {
        if x.nrows() != l.dim() {
            return Err(NetcohError::DimensionMismatch {
                expected: l.dim(),
                found: x.nrows(),
            });
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(NetcohError::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let n = x.nrows() as f64;
        for (j, col) in x.column_iter().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if mean.abs() > 1e-10 || (var - 1.0).abs() > 1e-8 {
                return Err(NetcohError::InvalidInput(format!(
                    "column {j} of X is not standardized (mean {mean:.3e}, variance {var:.6})"
                )));
            }
        }
        Ok(Self { l, x, lambda })
    }
}

/// Fits the linear RNC estimator by block elimination.
pub fn block_eliminate_fit(
    sys: &RncSystem<'_>,
    y: &[f64],
    opts: &SolverOptions,
) -> Result<BlockSolution> {
    if y.len() != sys.l.dim() {
        return Err(NetcohError::DimensionMismatch {
            expected: sys.l.dim(),
            found: y.len(),
        });
    }
    let b2: Vec<f64> = sys
        .x
        .tr_mul(&DVector::from_column_slice(y))
        .as_slice()
        .to_vec();
    block_eliminate(sys.l, sys.x, sys.lambda, Curvature::Identity, y, &b2, opts)
}

/// Dense `(X~'X~ + lambda M)` with `X~ = (I, X)` and `M = diag(L, 0)`.
pub fn rnc_system_matrix(l: &Laplacian, x: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let n = l.dim();
    let p = x.ncols();
    if n + p > MAX_DENSE {
        return Err(NetcohError::TooLarge {
            size: n + p,
            limit: MAX_DENSE,
        });
    }
    let mut a = DMatrix::zeros(n + p, n + p);
    a.view_mut((0, 0), (n, n))
        .copy_from(&(l.to_dense() * lambda));
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    a.view_mut((0, n), (n, p)).copy_from(x);
    a.view_mut((n, 0), (p, n)).copy_from(&x.transpose());
    a.view_mut((n, n), (p, p)).copy_from(&x.tr_mul(x));
    Ok(a)
}

/// Reference solution of the full `(n + p)` system by dense Cholesky.
pub fn dense_solve_oracle(sys: &RncSystem<'_>, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sys.l.dim();
    if y.len() != n {
        return Err(NetcohError::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let a = rnc_system_matrix(sys.l, sys.x, sys.lambda)?;
    let scale = a.diagonal().max();
    let singular =
        || NetcohError::EstimatorDoesNotExist("the RNC system matrix is singular".into());
    let chol = Cholesky::new(a).ok_or_else(singular)?;
    let fl = chol.l_dirty();
    let min_pivot = (0..fl.nrows())
        .map(|i| fl[(i, i)] * fl[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-12 * scale) {
        return Err(singular());
    }
    let yv = DVector::from_column_slice(y);
    let mut rhs = DVector::zeros(n + sys.x.ncols());
    rhs.rows_mut(0, n).copy_from(&yv);
    rhs.rows_mut(n, sys.x.ncols()).copy_from(&sys.x.tr_mul(&yv));
    let theta = chol.solve(&rhs);
    Ok((
        theta.as_slice()[..n].to_vec(),
        theta.as_slice()[n..].to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, Graph};
    use crate::standardize::standardize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path(n: usize) -> Graph {
        Graph::from_unweighted(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn identity_solves_in_one_step() {
        let s = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 4.0];
        let (x, rep) = pcg_solve(&s, &b, 1e-12, 50).unwrap();
        assert!(rep.iterations <= 1);
        assert_eq!(x, b.to_vec());
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let s = CsrMatrix::identity(3);
        let (x, rep) = pcg_solve(&s, &[0.0; 3], 1e-10, 10).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn path_system_matches_dense() {
        let l = laplacian(&path(50), 0.0).unwrap();
        let s = l.matrix().scaled(0.5).shifted(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, rep) = pcg_solve(&s, &b, 1e-12, 500).unwrap();
        assert!(rep.converged);
        let dense = s
            .to_dense()
            .cholesky()
            .unwrap()
            .solve(&DVector::from_vec(b));
        for i in 0..50 {
            assert!((x[i] - dense[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let s = CsrMatrix::from_triplets(2, 2, [(0, 0, 2.0), (0, 1, 1.0), (1, 1, 2.0)]);
        assert!(matches!(
            pcg_solve(&s, &[1.0, 1.0], 1e-8, 10),
            Err(NetcohError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn bare_laplacian_has_zero_margin() {
        let l = laplacian(&path(5), 0.0).unwrap();
        assert_eq!(l.matrix().scaled(2.0).dominance_margin(), 0.0);
        assert!(l.matrix().scaled(2.0).shifted(1.0).dominance_margin() > 0.0);
    }

    #[test]
    fn two_node_system_by_substitution() {
        let g = Graph::from_unweighted(2, [(0, 1)]).unwrap();
        let l = laplacian(&g, 0.0).unwrap();
        let x = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let y = [3.0, 1.0];
        let sys = RncSystem::new(&l, &x, 1.0).unwrap();
        let (a, b) = dense_solve_oracle(&sys, &y).unwrap();
        // [[2,-1,1],[-1,2,-1],[1,-1,2]] theta = (3, 1, 2)
        let m = [[2.0, -1.0, 1.0], [-1.0, 2.0, -1.0], [1.0, -1.0, 2.0]];
        let th = [a[0], a[1], b[0]];
        let rhs = [3.0, 1.0, 2.0];
        for r in 0..3 {
            let v: f64 = (0..3).map(|c| m[r][c] * th[c]).sum();
            assert!((v - rhs[r]).abs() < 1e-12);
        }
        let blk = block_eliminate_fit(&sys, &y, &SolverOptions::default()).unwrap();
        assert!((blk.a1[0] - a[0]).abs() < 1e-10 && (blk.a2[0] - b[0]).abs() < 1e-10);
    }

    #[test]
    fn empty_graph_without_ridge_is_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = DMatrix::from_fn(20, 2, |_, _| rng.gen_range(-1.0..1.0));
        let (x, _) = standardize(&raw).unwrap();
        let l = laplacian(&Graph::empty(20), 0.0).unwrap();
        let sys = RncSystem::new(&l, &x, 0.7).unwrap();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(matches!(
            dense_solve_oracle(&sys, &y),
            Err(NetcohError::EstimatorDoesNotExist(_))
        ));
        assert!(matches!(
            block_eliminate_fit(&sys, &y, &SolverOptions::default()),
            Err(NetcohError::EstimatorDoesNotExist(_))
        ));
    }

    #[test]
    fn unstandardized_design_is_rejected() {
        let l = laplacian(&path(3), 0.0).unwrap();
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(RncSystem::new(&l, &x, 1.0).is_err());
    }

    #[test]
    fn diagonal_curvature_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 30;
        let g = path(n);
        let l = laplacian(&g, 0.05).unwrap();
        let x = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.3)).collect();
        let b1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b2 = [0.3, -0.2];
        let sol = block_eliminate(
            &l,
            &x,
            2.0,
            Curvature::Diagonal(&w),
            &b1,
            &b2,
            &SolverOptions::default(),
        )
        .unwrap();
        let wm = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
        let mut a = DMatrix::zeros(n + 2, n + 2);
        a.view_mut((0, 0), (n, n))
            .copy_from(&(&wm + l.to_dense() * 2.0));
        a.view_mut((0, n), (n, 2)).copy_from(&(&wm * &x));
        a.view_mut((n, 0), (2, n)).copy_from(&(x.transpose() * &wm));
        a.view_mut((n, n), (2, 2))
            .copy_from(&(x.transpose() * &wm * &x));
        let mut rhs = b1.clone();
        rhs.extend_from_slice(&b2);
        let th = a.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..n {
            assert!((sol.a1[i] - th[i]).abs() < 1e-8);
        }
        for j in 0..2 {
            assert!((sol.a2[j] - th[n + j]).abs() < 1e-8);
        }
    }
}
