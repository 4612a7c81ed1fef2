//! Graph learning under smoothness priors: the Laplacian factor-analysis
//! model, the log-barrier framework on edge weights, and exact edge-subset
//! selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian_from_weights, Matrix, ShiftKind, ShiftOperator, SignalSet};
use crate::par;
use crate::solvers::{primal_dual_graph, GraphPrior, SolveTrace, SolverConfig};

/// Cap on the outer alternating-minimization loop of [`dong_learn`].
pub const DONG_OUTER_CAP: usize = 100;
/// Cap on the outer loop of [`edge_select_noisy`].
pub const EDGE_SELECT_OUTER_CAP: usize = 50;

/// Squared Euclidean distances between the rows of a signal set.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Matrix);

impl DistanceMatrix {
    /// Wraps a symmetric, nonnegative matrix with zero diagonal.
    pub fn new(z: Matrix) -> Result<Self> {
        if !z.is_square() {
            return Err(Error::BadDimension { expected: z.nrows(), got: z.ncols() });
        }
        let n = z.nrows();
        for i in 0..n {
            if z[(i, i)] != 0.0 {
                return Err(Error::BadInput(format!("distance diagonal entry {i} is nonzero")));
            }
            for j in 0..n {
                let v = z[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::BadInput(format!("invalid distance {v} at ({i}, {j})")));
                }
                if v != z[(j, i)] {
                    return Err(Error::NotSymmetric((v - z[(j, i)]).abs()));
                }
            }
        }
        Ok(Self(z))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

/// `Z_ij = ||x_i - x_j||^2` over the rows of `X`.
pub fn distance_matrix(x: &SignalSet) -> DistanceMatrix {
    let d = x.data();
    let n = d.nrows();
    let rows: Vec<Vec<f64>> = par::map_range(n, true, |i| {
        (0..n).map(|j| if i == j { 0.0 } else { (d.row(i) - d.row(j)).norm_squared() }).collect()
    });
    let mut z = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            z[(i, j)] = rows[i][j];
            z[(j, i)] = rows[i][j];
        }
    }
    DistanceMatrix(z)
}

/// `min ||W o Z||_1 - alpha 1^T log(W 1) + beta/2 ||W||_F^2` over valid
/// adjacencies. Every vertex keeps a positive degree.
pub fn kalofolias_learn(
    z: &DistanceMatrix,
    alpha: f64,
    beta: f64,
    config: &SolverConfig,
) -> Result<(ShiftOperator, SolveTrace)> {
    if !(alpha > 0.0) {
        return Err(Error::BadParameter(format!("alpha must be > 0, got {alpha}")));
    }
    if beta == 0.0 && (0..z.n()).any(|i| z.matrix().row(i).iter().all(|&v| v == 0.0)) {
        log::warn!("vertex with all-zero distances and beta = 0: weights are capped");
    }
    let (w, trace) = primal_dual_graph(z.matrix(), GraphPrior::LogBarrier { alpha }, beta, None, config)?;
    Ok((ShiftOperator::new(w, ShiftKind::Adjacency, false)?, trace))
}

/// Degree-dependent regularizer of the general smoothness framework.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SmoothPrior {
    LogBarrier { alpha: f64, beta: f64 },
    /// `sigma^2 sum W_ij (log W_ij - 1)`, minimized in closed form by the
    /// Gaussian kernel.
    GaussianEntropy { sigma: f64 },
}

/// `min ||W o Z||_1 + g(W)` for the chosen regularizer.
pub fn general_smooth_learn(
    z: &DistanceMatrix,
    prior: SmoothPrior,
    config: &SolverConfig,
) -> Result<(ShiftOperator, SolveTrace)> {
    match prior {
        SmoothPrior::LogBarrier { alpha, beta } => kalofolias_learn(z, alpha, beta, config),
        SmoothPrior::GaussianEntropy { sigma } => {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::BadParameter(format!("sigma must be > 0, got {sigma}")));
            }
            let s2 = sigma * sigma;
            let n = z.n();
            let w = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (-z.matrix()[(i, j)] / s2).exp() });
            let mut trace = SolveTrace::default();
            trace.converged = true;
            Ok((ShiftOperator::new(w, ShiftKind::Adjacency, false)?, trace))
        }
    }
}

/// `(I + alpha L)^{-1} X` with one factorization shared by all columns.
pub fn graph_smoother(l: &Matrix, x: &Matrix, alpha: f64) -> Result<Matrix> {
    let n = l.nrows();
    let a = Matrix::identity(n, n) + l * alpha;
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(x))
}

/// Result of the Laplacian factor-analysis learner.
#[derive(Debug, Clone)]
pub struct DongFit {
    pub laplacian: ShiftOperator,
    /// Denoised signals.
    pub y: Matrix,
    /// Outer objective per sweep.
    pub trace: SolveTrace,
}

/// `||X - Y||_F^2 + alpha tr(Y^T L Y) + beta/2 ||L||_F^2`.
pub fn dong_objective(x: &Matrix, y: &Matrix, l: &Matrix, alpha: f64, beta: f64) -> f64 {
    (x - y).norm_squared() + alpha * (y.transpose() * l * y).trace() + 0.5 * beta * l.norm_squared()
}

/// Alternating minimization of the Laplacian factor-analysis objective
/// over valid Laplacians with `trace(L) = N` and denoised signals `Y`.
///
/// The `Y` step is the graph smoother `(I + alpha L)^{-1} X`. The `L` step
/// is solved over edge weights with `||W||_1 = N` enforced exactly by the
/// primal-dual engine.
pub fn dong_learn(x: &SignalSet, alpha: f64, beta: f64, config: &SolverConfig) -> Result<DongFit> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::BadParameter(format!("alpha and beta must be > 0, got {alpha}, {beta}")));
    }
    let n = x.n();
    let xd = x.data();
    let prior = GraphPrior::DegreeQuadratic { total: n as f64 };
    let mut y = xd.clone();
    let mut w: Option<Matrix> = None;
    let mut l = Matrix::zeros(n, n);
    let mut trace = SolveTrace::default();
    let mut prev = f64::INFINITY;
    for _ in 0..DONG_OUTER_CAP {
        // tr(Y^T L Y) = z^T w over pairs, and the engine's fit term is 2 z'^T w
        let z = distance_matrix(&SignalSet::new(y.clone())?).0 * (alpha / 2.0);
        let (w_new, inner) = primal_dual_graph(&z, prior, beta, w.as_ref(), config)?;
        if !inner.converged {
            log::debug!("dong L-step stopped after {} iterations", inner.iters_used);
        }
        l = laplacian_from_weights(&w_new);
        w = Some(w_new);
        y = graph_smoother(&l, xd, alpha)?;
        let obj = dong_objective(xd, &y, &l, alpha, beta);
        let change = (prev - obj).abs();
        trace.record(obj, change, inner.iters_used as f64);
        if change <= config.tol * obj.abs().max(1.0) {
            trace.converged = true;
            break;
        }
        prev = obj;
    }
    let laplacian = ShiftOperator::from_estimate(l, ShiftKind::Laplacian)?;
    Ok(DongFit { laplacian, y, trace })
}

/// Selected edges and the score of every candidate pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSelection {
    pub edges: Vec<(usize, usize)>,
    /// `(i, j, c_ij)` for all pairs `i < j`, in lexicographic order.
    pub scores: Vec<(usize, usize, f64)>,
}

impl EdgeSelection {
    /// Unweighted adjacency of the selected edges.
    pub fn adjacency(&self, n: usize) -> ShiftOperator {
        let mut w = Matrix::zeros(n, n);
        for &(i, j) in &self.edges {
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
        ShiftOperator::new(w, ShiftKind::Adjacency, false).expect("0/1 symmetric matrix is a valid adjacency")
    }
}

fn select_from_scores(z: &Matrix, k: usize) -> Result<EdgeSelection> {
    let n = z.nrows();
    let m = n * (n - 1) / 2;
    if k < 1 || k > m {
        return Err(Error::BadK { k, lo: 1, hi: m });
    }
    let mut scores = Vec::with_capacity(m);
    for i in 0..n {
        for j in (i + 1)..n {
            scores.push((i, j, z[(i, j)]));
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    // stable sort keeps lexicographic order among ties
    order.sort_by(|&a, &b| scores[a].2.total_cmp(&scores[b].2));
    let mut edges: Vec<(usize, usize)> = order[..k].iter().map(|&q| (scores[q].0, scores[q].1)).collect();
    edges.sort_unstable();
    Ok(EdgeSelection { edges, scores })
}

/// The `K` edges with the smallest scores `c_m = tr(X^T b_m b_m^T X) = Z_ij`,
/// which exactly minimizes `tr(X^T L(w) X)` over `K`-edge unweighted graphs.
pub fn edge_select(x: &SignalSet, k: usize) -> Result<EdgeSelection> {
    select_from_scores(distance_matrix(x).matrix(), k)
}

fn unweighted_laplacian(n: usize, edges: &[(usize, usize)]) -> Matrix {
    let mut l = Matrix::zeros(n, n);
    for &(i, j) in edges {
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
    }
    l
}

#[derive(Debug, Clone)]
pub struct NoisyEdgeSelection {
    pub selection: EdgeSelection,
    pub y: Matrix,
    pub trace: SolveTrace,
}

/// Edge selection from noisy signals: alternates the graph smoother with
/// exact rank ordering on the smoothed signals until the edge set repeats.
pub fn edge_select_noisy(x: &SignalSet, k: usize, alpha: f64) -> Result<NoisyEdgeSelection> {
    if !(alpha > 0.0) {
        return Err(Error::BadParameter(format!("alpha must be > 0, got {alpha}")));
    }
    let n = x.n();
    let xd = x.data();
    let mut selection = edge_select(x, k)?;
    let mut trace = SolveTrace::default();
    let mut y;
    loop {
        let l = unweighted_laplacian(n, &selection.edges);
        y = graph_smoother(&l, xd, alpha)?;
        let obj = (xd - &y).norm_squared() + alpha * (y.transpose() * &l * &y).trace();
        trace.record(obj, 0.0, 0.0);
        let next = select_from_scores(distance_matrix(&SignalSet::new(y.clone())?).matrix(), k)?;
        if next.edges == selection.edges {
            trace.converged = true;
            break;
        }
        selection = next;
        if trace.iters_used >= EDGE_SELECT_OUTER_CAP {
            break;
        }
    }
    Ok(NoisyEdgeSelection { selection, y, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn three_rows() -> SignalSet {
        SignalSet::new(Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 5.0, 5.0])).unwrap()
    }

    #[test]
    fn distances_by_hand() {
        let z = distance_matrix(&three_rows());
        assert_eq!(z.matrix()[(0, 1)], 2.0);
        assert_eq!(z.matrix()[(0, 2)], 50.0);
        assert_eq!(z.matrix()[(1, 2)], 32.0);
        let scaled = SignalSet::new(three_rows().data() * 3.0).unwrap();
        assert_abs_diff_eq!(distance_matrix(&scaled).matrix(), &(z.matrix() * 9.0), epsilon = 1e-12);
    }

    #[test]
    fn rank_ordering_examples() {
        let sel = edge_select(&three_rows(), 1).unwrap();
        assert_eq!(sel.edges, vec![(0, 1)]);
        assert_eq!(sel.scores, vec![(0, 1, 2.0), (0, 2, 50.0), (1, 2, 32.0)]);
        assert_eq!(edge_select(&three_rows(), 3).unwrap().edges.len(), 3);
        assert!(matches!(edge_select(&three_rows(), 4), Err(Error::BadK { .. })));
        let constant = SignalSet::new(Matrix::from_element(4, 3, 2.0)).unwrap();
        assert_eq!(edge_select(&constant, 2).unwrap().edges, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn two_vertex_barrier() {
        let z = DistanceMatrix::new(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let (w, _) = kalofolias_learn(&z, 1.0, 0.0, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(w.matrix()[(0, 1)], 1.0, epsilon = 1e-6);
        let (w, _) = kalofolias_learn(&z, 1.0, 1.0, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(w.matrix()[(0, 1)], 0.6180339887, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_kernel() {
        let z = DistanceMatrix::new(Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 2.0, 0.0])).unwrap();
        let (w, _) = general_smooth_learn(&z, SmoothPrior::GaussianEntropy { sigma: 1.0 }, &SolverConfig::default())
            .unwrap();
        assert_abs_diff_eq!(w.matrix()[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(w.matrix()[(0, 2)], 1.0);
        assert_eq!(w.matrix()[(0, 0)], 0.0);
        assert!(general_smooth_learn(&z, SmoothPrior::GaussianEntropy { sigma: 0.0 }, &SolverConfig::default()).is_err());
    }

    #[test]
    fn log_barrier_delegates() {
        let z = distance_matrix(&three_rows());
        let cfg = SolverConfig::default();
        let a = general_smooth_learn(&z, SmoothPrior::LogBarrier { alpha: 2.0, beta: 0.5 }, &cfg).unwrap();
        let b = kalofolias_learn(&z, 2.0, 0.5, &cfg).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn smoother_fixes_constants() {
        let l = Matrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 3.0, -2.0, 0.0, -2.0, 2.0]);
        let x = Matrix::from_element(3, 4, 1.5);
        assert_abs_diff_eq!(graph_smoother(&l, &x, 10.0).unwrap(), x, epsilon = 1e-12);
    }

    #[test]
    fn distance_rejects_bad_input() {
        assert!(DistanceMatrix::new(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])).is_err());
        assert!(DistanceMatrix::new(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0])).is_err());
        assert!(DistanceMatrix::new(Matrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0])).is_err());
    }
}
