use crate::error::{Error, Result};
use crate::graph::{Matrix, Vector};

use super::{SolveTrace, SolverConfig};

#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// A lasso in Gram form:
/// `min_b 0.5 b^T G b - c^T b + lambda * sum_{j penalized} |b_j|`.
#[derive(Debug, Clone)]
pub struct LassoProblem<'a> {
    pub gram: &'a Matrix,
    pub corr: &'a Vector,
    pub lambda: f64,
    /// Coordinates excluded from the l1 penalty; all penalized when `None`.
    pub unpenalized: Option<&'a [bool]>,
}

impl LassoProblem<'_> {
    fn penalty(&self, j: usize) -> f64 {
        match self.unpenalized {
            Some(mask) if mask[j] => 0.0,
            _ => self.lambda,
        }
    }

    fn objective(&self, beta: &Vector, grad: &Vector) -> f64 {
        // with grad = G b - c: 0.5 b^T G b - c^T b = 0.5 b^T (grad - c)
        let quad = 0.5 * beta.dot(&(grad - self.corr));
        let l1: f64 = beta.iter().enumerate().map(|(j, b)| self.penalty(j) * b.abs()).sum();
        quad + l1
    }

    fn kkt_violation(&self, beta: &Vector, grad: &Vector) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..beta.len() {
            let lam = self.penalty(j);
            let g = grad[j];
            let v = if beta[j] == 0.0 {
                (g.abs() - lam).max(0.0)
            } else {
                (g + lam * beta[j].signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}

/// Cyclic coordinate descent on a Gram-form lasso, optionally warm started.
/// Stops once the KKT violation drops below `tol * max(||c||_inf, 1)`.
pub fn lasso_gram(
    problem: &LassoProblem<'_>,
    warm: Option<&Vector>,
    config: &SolverConfig,
) -> Result<(Vector, SolveTrace)> {
    config.validate()?;
    let k = problem.corr.len();
    if problem.gram.nrows() != k || problem.gram.ncols() != k {
        return Err(Error::BadDimension {
            expected: k,
            got: problem.gram.nrows(),
        });
    }
    if !(problem.lambda >= 0.0) {
        return Err(Error::BadParameter(format!("lambda must be >= 0, got {}", problem.lambda)));
    }
    if problem.gram.iter().chain(problem.corr.iter()).any(|v| !v.is_finite()) {
        return Err(Error::BadInput("non-finite lasso data".into()));
    }
    let g = problem.gram;
    let mut beta = match warm {
        Some(w) if w.len() == k => w.clone(),
        _ => Vector::zeros(k),
    };
    let mut grad = g * &beta - problem.corr;
    let scale = problem.corr.amax().max(1.0);
    let mut trace = SolveTrace::default();
    let mut prev_obj = problem.objective(&beta, &grad);
    for _ in 0..config.max_iters {
        for j in 0..k {
            let gjj = g[(j, j)];
            if gjj <= 0.0 {
                if beta[j] != 0.0 {
                    let delta = -beta[j];
                    beta[j] = 0.0;
                    grad.axpy(delta, &g.column(j), 1.0);
                }
                continue;
            }
            let old = beta[j];
            // partial residual correlation excluding coordinate j
            let rho_j = gjj * old - grad[j];
            let new = soft_threshold(rho_j, problem.penalty(j)) / gjj;
            if new != old {
                beta[j] = new;
                grad.axpy(new - old, &g.column(j), 1.0);
            }
        }
        let obj = problem.objective(&beta, &grad);
        let viol = problem.kkt_violation(&beta, &grad);
        trace.record(obj, viol, (prev_obj - obj).abs());
        prev_obj = obj;
        if viol <= config.tol * scale {
            trace.converged = true;
            break;
        }
    }
    Ok((beta, trace))
}

/// Solves `min_b 0.5 ||y - A b||^2 + lambda ||b||_1` by coordinate descent.
/// The recorded objective includes the constant `0.5 ||y||^2`.
pub fn lasso_cd(a: &Matrix, y: &Vector, lambda: f64, config: &SolverConfig) -> Result<(Vector, SolveTrace)> {
    if a.ncols() == 0 {
        return Err(Error::BadInput("design matrix has no columns".into()));
    }
    if a.nrows() != y.len() {
        return Err(Error::BadDimension {
            expected: a.nrows(),
            got: y.len(),
        });
    }
    if a.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::BadInput("non-finite lasso data".into()));
    }
    let gram = a.tr_mul(a);
    let corr = a.tr_mul(y);
    let problem = LassoProblem {
        gram: &gram,
        corr: &corr,
        lambda,
        unpenalized: None,
    };
    let (beta, mut trace) = lasso_gram(&problem, None, config)?;
    let offset = 0.5 * y.norm_squared();
    for v in trace.objective.iter_mut() {
        *v += offset;
    }
    Ok((beta, trace))
}
