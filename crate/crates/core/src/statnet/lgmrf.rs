use crate::error::{Error, Result};
use crate::graph::{laplacian_from_weights, max_asymmetry, Matrix, ShiftKind, ShiftOperator, Vector};
use crate::solvers::{SolveTrace, SolverConfig};

/// Estimate `Theta = L + gamma I` of a Laplacian-constrained GMRF.
#[derive(Debug, Clone)]
pub struct LaplacianGmrf {
    pub laplacian: ShiftOperator,
    pub gamma: f64,
    pub trace: SolveTrace,
}

struct Params {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl Params {
    fn new(n: usize) -> Self {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
            }
        }
        Self { n, pairs }
    }

    /// Parameter vector `[w_0 .. w_{M-1}, gamma]` to `Theta`.
    fn theta(&self, x: &Vector) -> Matrix {
        let n = self.n;
        let mut t = Matrix::zeros(n, n);
        for (m, &(i, j)) in self.pairs.iter().enumerate() {
            let w = x[m];
            t[(i, j)] -= w;
            t[(j, i)] -= w;
            t[(i, i)] += w;
            t[(j, j)] += w;
        }
        let gamma = x[self.pairs.len()];
        for i in 0..n {
            t[(i, i)] += gamma;
        }
        t
    }

    /// Objective and gradient; `None` when `Theta` is not positive definite.
    fn eval(&self, x: &Vector, cov: &Matrix, lambda: f64) -> Option<(f64, Vector)> {
        let theta = self.theta(x);
        let chol = theta.cholesky()?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let inv = chol.inverse();
        let m = self.pairs.len();
        let n = self.n as f64;
        let mut f = -logdet;
        let mut g = Vector::zeros(m + 1);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let dc = cov[(i, i)] + cov[(j, j)] - 2.0 * cov[(i, j)];
            let di = inv[(i, i)] + inv[(j, j)] - 2.0 * inv[(i, j)];
            f += x[k] * (dc + 4.0 * lambda);
            g[k] = dc - di + 4.0 * lambda;
        }
        let gamma = x[m];
        f += gamma * (cov.trace() + n * lambda);
        g[m] = cov.trace() - inv.trace() + n * lambda;
        Some((f, g))
    }
}

fn project(x: &Vector) -> Vector {
    x.map(|v| v.max(0.0))
}

/// `-logdet Theta + tr(S Theta) + lambda ||Theta||_1` at `Theta = L + gamma I`.
/// Infinite when `Theta` is not positive definite.
pub fn lgmrf_objective(laplacian: &Matrix, gamma: f64, cov: &Matrix, lambda: f64) -> f64 {
    let n = laplacian.nrows();
    let theta = laplacian + Matrix::identity(n, n) * gamma;
    let Some(chol) = theta.clone().cholesky() else {
        return f64::INFINITY;
    };
    let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -logdet + cov.component_mul(&theta).sum() + lambda * theta.abs().sum()
}

/// Penalized Gaussian MLE over precision matrices `L + gamma I`, with `L`
/// a combinatorial Laplacian and `gamma >= 0`.
///
/// Solved by spectral projected gradient on the edge weights and `gamma`
/// (Barzilai-Borwein steps with Armijo backtracking, which also keeps
/// `Theta` positive definite).
pub fn laplacian_gmrf(cov: &Matrix, lambda: f64, config: &SolverConfig) -> Result<LaplacianGmrf> {
    config.validate()?;
    let n = cov.nrows();
    if !cov.is_square() || n < 2 {
        return Err(Error::BadDimension { expected: n.max(2), got: cov.ncols() });
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::BadInput("non-finite covariance entry".into()));
    }
    if max_asymmetry(cov) > 1e-10 * cov.amax().max(1.0) {
        return Err(Error::NotSymmetric(max_asymmetry(cov)));
    }
    if !(lambda >= 0.0) {
        return Err(Error::BadParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let cov = (cov + cov.transpose()) * 0.5;
    let params = Params::new(n);
    let m = params.pairs.len();

    let mut x = Vector::zeros(m + 1);
    x[m] = n as f64 / (cov.trace() + n as f64 * lambda).max(f64::MIN_POSITIVE);
    let (mut f, mut g) = params
        .eval(&x, &cov, lambda)
        .ok_or_else(|| Error::BadInput("covariance scale is degenerate".into()))?;
    let scale = cov.amax().max(lambda).max(1.0);
    let mut step = 1.0 / g.amax().max(1.0);
    let mut trace = SolveTrace::default();
    for _ in 0..config.max_iters {
        let pg = (&x - project(&(&x - &g))).amax();
        if pg <= config.feas_tol * scale {
            trace.converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = project(&(&x - &g * t));
            if let Some((fc, gc)) = params.eval(&cand, &cov, lambda) {
                let d = &cand - &x;
                if fc <= f + 1e-4 * g.dot(&d) {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            log::warn!("laplacian GMRF line search failed");
            break;
        };
        let s = &cand - &x;
        let y = &gc - &g;
        let sy = s.dot(&y);
        step = if sy > 0.0 { (s.norm_squared() / sy).clamp(1e-12, 1e12) } else { t * 2.0 };
        let rel = (f - fc).abs() / f.abs().max(1.0);
        x = cand;
        f = fc;
        g = gc;
        trace.record(f, s.amax(), (x.clone() - project(&(&x - &g))).amax());
        if rel == 0.0 && s.amax() == 0.0 {
            break;
        }
    }
    if !trace.converged {
        log::warn!("laplacian GMRF stopped after {} iterations without converging", trace.iters_used);
    }
    let mut w = Matrix::zeros(n, n);
    for (k, &(i, j)) in params.pairs.iter().enumerate() {
        w[(i, j)] = x[k];
        w[(j, i)] = x[k];
    }
    let laplacian = ShiftOperator::new(laplacian_from_weights(&w), ShiftKind::Laplacian, false)?;
    Ok(LaplacianGmrf { laplacian, gamma: x[m], trace })
}
