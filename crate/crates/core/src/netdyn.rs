//! Directed and time-varying topologies: structural equation models, sparse
//! vector autoregressions and exponentially weighted SEM tracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Matrix, ShiftKind, ShiftOperator, SignalSet, Vector};
use crate::par;
use crate::solvers::{lasso_gram, LassoProblem, SolveTrace, SolverConfig};
use crate::statnet::CombineRule;

/// Observations of `x = W x + diag(omega) u + noise`, grouped into epochs.
/// Each epoch holds one or more columns (cascades) with matching inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeData {
    epochs: Vec<(Matrix, Matrix)>,
    timestamps: Vec<f64>,
}

impl CascadeData {
    /// One epoch per column of `x`, inputs taken column by column from `u`.
    pub fn from_columns(x: &Matrix, u: &Matrix) -> Result<Self> {
        if x.shape() != u.shape() {
            return Err(Error::BadDimension { expected: x.ncols(), got: u.ncols() });
        }
        let epochs = (0..x.ncols())
            .map(|t| (x.columns(t, 1).into_owned(), u.columns(t, 1).into_owned()))
            .collect();
        Self::new(epochs)
    }

    /// Cascade form: epoch `t` observes `xs[t]` (N x C) while the inputs of
    /// the C cascades stay fixed at `u` (N x C).
    pub fn cascades(xs: Vec<Matrix>, u: &Matrix) -> Result<Self> {
        Self::new(xs.into_iter().map(|x| (x, u.clone())).collect())
    }

    pub fn new(epochs: Vec<(Matrix, Matrix)>) -> Result<Self> {
        let Some((x0, _)) = epochs.first() else {
            return Err(Error::BadInput("no epochs".into()));
        };
        let n = x0.nrows();
        if n < 2 {
            return Err(Error::BadDimension { expected: 2, got: n });
        }
        for (x, u) in &epochs {
            if x.nrows() != n || x.ncols() == 0 {
                return Err(Error::BadDimension { expected: n, got: x.nrows() });
            }
            if u.shape() != x.shape() {
                return Err(Error::BadDimension { expected: x.ncols(), got: u.ncols() });
            }
            if x.iter().chain(u.iter()).any(|v| !v.is_finite()) {
                return Err(Error::BadInput("non-finite cascade data".into()));
            }
        }
        let timestamps = (0..epochs.len()).map(|t| t as f64).collect();
        Ok(Self { epochs, timestamps })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.len() != self.epochs.len() {
            return Err(Error::BadDimension { expected: self.epochs.len(), got: timestamps.len() });
        }
        self.timestamps = timestamps;
        Ok(self)
    }

    /// Signals carrying inputs, one epoch per column.
    pub fn from_signals(x: &SignalSet) -> Result<Self> {
        let u = x.inputs().ok_or_else(|| Error::BadInput("signals carry no exogenous inputs".into()))?;
        Self::from_columns(x.data(), u)
    }

    pub fn n(&self) -> usize {
        self.epochs[0].0.nrows()
    }

    pub fn epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn epoch(&self, t: usize) -> (&Matrix, &Matrix) {
        let (x, u) = &self.epochs[t];
        (x, u)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }
}

/// Exponentially weighted second moments of the stacked vector `[x; u]`:
/// `G_t = gamma G_{t-1} + sum_c z_c z_c^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGram {
    gamma: f64,
    gram: Matrix,
}

impl WeightedGram {
    pub fn new(n: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::BadParameter(format!("forgetting factor must lie in (0, 1], got {gamma}")));
        }
        Ok(Self { gamma, gram: Matrix::zeros(2 * n, 2 * n) })
    }

    pub fn update(&mut self, x: &Matrix, u: &Matrix) {
        let n = x.nrows();
        self.gram *= self.gamma;
        let mut z = Matrix::zeros(2 * n, x.ncols());
        z.rows_mut(0, n).copy_from(x);
        z.rows_mut(n, n).copy_from(u);
        self.gram.gemm(1.0, &z, &z.transpose(), 1.0);
    }

    /// Weighted Gram of epochs `0..=last`, summed directly.
    pub fn from_scratch(data: &CascadeData, last: usize, gamma: f64) -> Matrix {
        let n = data.n();
        let mut g = Matrix::zeros(2 * n, 2 * n);
        for t in 0..=last {
            let (x, u) = data.epoch(t);
            let mut z = Matrix::zeros(2 * n, x.ncols());
            z.rows_mut(0, n).copy_from(x);
            z.rows_mut(n, n).copy_from(u);
            g += &z * z.transpose() * gamma.powi((last - t) as i32);
        }
        g
    }

    pub fn matrix(&self) -> &Matrix {
        &self.gram
    }
}

/// Regressors of node `i`: every other node, then its own input.
fn regressors(n: usize, i: usize) -> Vec<usize> {
    (0..n).filter(|&j| j != i).chain(std::iter::once(n + i)).collect()
}

struct NodeFit {
    coef: Vector,
    objective: f64,
    trace: SolveTrace,
}

/// Lasso for row `i` of `W` plus `omega_i` against a stacked Gram.
/// The residual sum of squares plus `alpha ||w_i||_1` is reported.
fn fit_node(gram: &Matrix, i: usize, alpha: f64, warm: Option<&Vector>, config: &SolverConfig) -> Result<NodeFit> {
    let n = gram.nrows() / 2;
    let idx = regressors(n, i);
    let g = gram.select_rows(&idx).select_columns(&idx);
    let c = Vector::from_iterator(idx.len(), idx.iter().map(|&j| gram[(j, i)]));
    let mut mask = vec![false; idx.len()];
    mask[idx.len() - 1] = true;
    let problem = LassoProblem { gram: &g, corr: &c, lambda: alpha / 2.0, unpenalized: Some(&mask) };
    let (coef, trace) = lasso_gram(&problem, warm, config)?;
    let l1: f64 = coef.iter().take(n - 1).map(|v| v.abs()).sum();
    let rss = gram[(i, i)] - 2.0 * c.dot(&coef) + coef.dot(&(&g * &coef));
    Ok(NodeFit { coef, objective: rss.max(0.0) + alpha * l1, trace })
}

fn assemble(n: usize, fits: &[NodeFit]) -> (Matrix, Vector) {
    let mut w = Matrix::zeros(n, n);
    let mut omega = Vector::zeros(n);
    for (i, fit) in fits.iter().enumerate() {
        for (slot, j) in (0..n).filter(|&j| j != i).enumerate() {
            w[(i, j)] = fit.coef[slot];
        }
        omega[i] = fit.coef[n - 1];
    }
    (w, omega)
}

fn fit_all(gram: &Matrix, alpha: f64, warm: Option<&[Vector]>, config: &SolverConfig) -> Result<Vec<NodeFit>> {
    let n = gram.nrows() / 2;
    par::map_range(n, config.parallel, |i| fit_node(gram, i, alpha, warm.map(|w| &w[i]), config))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone)]
pub struct SemFit {
    /// Directed weights, `w[(i, j)]` for the edge `j -> i`.
    pub w: ShiftOperator,
    pub omega: Vector,
    /// Penalized least-squares objective.
    pub objective: f64,
    /// Per-node solver traces.
    pub traces: Vec<SolveTrace>,
}

/// Penalized least squares for `x = W x + diag(omega) u + noise` with
/// `alpha ||W||_1`, zero diagonal and unpenalized `omega`, solved node by node.
pub fn sem_fit(data: &CascadeData, alpha: f64, config: &SolverConfig) -> Result<SemFit> {
    if !(alpha >= 0.0) {
        return Err(Error::BadParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    let gram = WeightedGram::from_scratch(data, data.epochs() - 1, 1.0);
    let fits = fit_all(&gram, alpha, None, config)?;
    let (w, omega) = assemble(data.n(), &fits);
    Ok(SemFit {
        w: ShiftOperator::new(w, ShiftKind::Generic, true)?,
        omega,
        objective: fits.iter().map(|f| f.objective).sum(),
        traces: fits.into_iter().map(|f| f.trace).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub epoch: usize,
    pub timestamp: f64,
    /// `w[i][j]` is the weight of `j -> i`; the diagonal is zero.
    pub w: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
    pub edge_count: usize,
    pub objective: f64,
}

impl TrajectoryPoint {
    pub fn matrix(&self) -> Matrix {
        let n = self.w.len();
        Matrix::from_fn(n, n, |i, j| self.w[i][j])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphTrajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl GraphTrajectory {
    pub fn edge_counts(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.edge_count).collect()
    }
}

/// Tracks a time-varying SEM by minimizing, at every epoch `T`, the
/// `gamma^(T - t)` weighted residuals of all past epochs plus
/// `alpha ||W_T||_1`. Each epoch is warm started from the previous one.
/// Every `stride`-th epoch and the last one are recorded.
pub fn dynamic_sem_track(
    data: &CascadeData,
    gamma: f64,
    alpha: f64,
    stride: usize,
    config: &SolverConfig,
) -> Result<GraphTrajectory> {
    if !(alpha >= 0.0) {
        return Err(Error::BadParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    let stride = stride.max(1);
    let n = data.n();
    let mut gram = WeightedGram::new(n, gamma)?;
    let mut warm: Option<Vec<Vector>> = None;
    let mut traj = GraphTrajectory::default();
    for t in 0..data.epochs() {
        let (x, u) = data.epoch(t);
        gram.update(x, u);
        let fits = fit_all(gram.matrix(), alpha, warm.as_deref(), config)?;
        if t % stride == 0 || t + 1 == data.epochs() {
            let (w, omega) = assemble(n, &fits);
            traj.points.push(TrajectoryPoint {
                epoch: t,
                timestamp: data.timestamps()[t],
                w: w.row_iter().map(|r| r.iter().copied().collect()).collect(),
                omega: omega.iter().copied().collect(),
                edge_count: w.iter().filter(|v| **v != 0.0).count(),
                objective: fits.iter().map(|f| f.objective).sum(),
            });
        }
        warm = Some(fits.into_iter().map(|f| f.coef).collect());
    }
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct SvarmFit {
    /// `lags[l][(i, j)]` weighs `x_j` at lag `l + 1` in the equation of `x_i`.
    pub lags: Vec<Matrix>,
    /// 0/1 directed adjacency, `(i, j)` for `j -> i`, no self loops.
    pub adjacency: Matrix,
    pub traces: Vec<SolveTrace>,
}

/// Sparse vector autoregression of order `order`, one lasso per node over
/// all lagged values with loss `(1/T') sum residual^2 + lambda ||b||_1`.
/// An edge `j -> i` is kept if any (`Or`) or every (`And`) lag weight is
/// nonzero.
pub fn svarm_fit(x: &Matrix, order: usize, lambda: f64, rule: CombineRule, config: &SolverConfig) -> Result<SvarmFit> {
    let (n, t) = x.shape();
    if order < 1 {
        return Err(Error::BadParameter("model order must be >= 1".into()));
    }
    if t <= order + 1 {
        return Err(Error::TooFewSamples { need: order + 2, got: t });
    }
    if !(lambda >= 0.0) {
        return Err(Error::BadParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::BadInput("non-finite series".into()));
    }
    let samples = t - order;
    // rows: [x_{t-1}; ...; x_{t-order}]
    let mut z = Matrix::zeros(n * order, samples);
    for l in 0..order {
        z.rows_mut(l * n, n).copy_from(&x.columns(order - 1 - l, samples));
    }
    let y = x.columns(order, samples);
    let gram = &z * z.transpose() / samples as f64;
    let cross = &z * y.transpose() / samples as f64;
    let fits = par::map_range(n, config.parallel, |i| {
        let c = cross.column(i).into_owned();
        let problem = LassoProblem { gram: &gram, corr: &c, lambda: lambda / 2.0, unpenalized: None };
        lasso_gram(&problem, None, config)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut lags = vec![Matrix::zeros(n, n); order];
    for (i, (b, _)) in fits.iter().enumerate() {
        for (l, lag) in lags.iter_mut().enumerate() {
            for j in 0..n {
                lag[(i, j)] = b[l * n + j];
            }
        }
    }
    let adjacency = Matrix::from_fn(n, n, |i, j| {
        let mut nz = lags.iter().map(|m| m[(i, j)] != 0.0);
        let on = match rule {
            CombineRule::Or => nz.any(|b| b),
            CombineRule::And => nz.all(|b| b),
        };
        if i != j && on {
            1.0
        } else {
            0.0
        }
    });
    Ok(SvarmFit { lags, adjacency, traces: fits.into_iter().map(|f| f.1).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gen_sem, standard_normal, RngSpec};
    use approx::assert_abs_diff_eq;

    fn two_node_data(noise: f64) -> (Matrix, CascadeData) {
        let w = Matrix::from_row_slice(2, 2, &[0.0, 0.5, 0.2, 0.0]);
        let mut rng = RngSpec::new(5).rng();
        let u = standard_normal(2, 50, &mut rng);
        let s = ShiftOperator::new(w.clone(), ShiftKind::Generic, true).unwrap();
        let x = gen_sem(&s, &Vector::from_element(2, 1.0), &u, noise, &mut rng).unwrap();
        (w, CascadeData::from_signals(&x).unwrap())
    }

    #[test]
    fn noiseless_two_node_sem() {
        let (w, data) = two_node_data(0.0);
        let cfg = SolverConfig::default().with_tol(1e-12).with_max_iters(100_000);
        let fit = sem_fit(&data, 1e-9, &cfg).unwrap();
        assert_abs_diff_eq!(fit.w.matrix().clone(), w, epsilon = 1e-4);
        assert_abs_diff_eq!(fit.omega, Vector::from_element(2, 1.0), epsilon = 1e-4);
    }

    #[test]
    fn huge_alpha_gives_input_only_fit() {
        let (_, data) = two_node_data(0.1);
        let fit = sem_fit(&data, 1e9, &SolverConfig::default()).unwrap();
        assert_eq!(fit.w.matrix().clone(), Matrix::zeros(2, 2));
        let g = WeightedGram::from_scratch(&data, data.epochs() - 1, 1.0);
        for i in 0..2 {
            assert_abs_diff_eq!(fit.omega[i], g[(i, 2 + i)] / g[(2 + i, 2 + i)], epsilon = 1e-9);
        }
    }

    #[test]
    fn recursive_gram_matches_direct() {
        let (_, data) = two_node_data(0.1);
        let mut g = WeightedGram::new(2, 0.7).unwrap();
        for t in 0..data.epochs() {
            let (x, u) = data.epoch(t);
            g.update(x, u);
            let direct = WeightedGram::from_scratch(&data, t, 0.7);
            assert!((g.matrix() - &direct).amax() <= 1e-9 * direct.amax().max(1.0));
        }
    }

    #[test]
    fn svarm_rejects_short_series() {
        let x = Matrix::zeros(3, 3);
        let err = svarm_fit(&x, 2, 0.1, CombineRule::Or, &SolverConfig::default());
        assert_eq!(err.unwrap_err(), Error::TooFewSamples { need: 4, got: 3 });
    }
}
