use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::graph::{max_asymmetry, Matrix};
use crate::solvers::{prox_neg_logdet, soft_threshold, SolveTrace, SolverConfig};

fn penalized(i: usize, j: usize, penalize_diagonal: bool) -> bool {
    i != j || penalize_diagonal
}

/// `-logdet T + tr(S T) + lambda ||T||_1`, the diagonal excluded from the
/// penalty unless `penalize_diagonal`. Infinite if `T` is not PD.
pub fn glasso_objective(theta: &Matrix, cov: &Matrix, lambda: f64, penalize_diagonal: bool) -> f64 {
    let Some(chol) = theta.clone().cholesky() else {
        return f64::INFINITY;
    };
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let n = theta.nrows();
    let mut l1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if penalized(i, j, penalize_diagonal) {
                l1 += theta[(i, j)].abs();
            }
        }
    }
    -logdet + cov.component_mul(theta).sum() + lambda * l1
}

/// Largest violation of the subgradient optimality condition
/// `0 in -T^{-1} + S + lambda dR(T)`.
pub fn glasso_kkt_residual(theta: &Matrix, cov: &Matrix, lambda: f64, penalize_diagonal: bool) -> f64 {
    let Some(inv) = theta.clone().try_inverse() else {
        return f64::INFINITY;
    };
    let g = cov - inv;
    let n = theta.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = if !penalized(i, j, penalize_diagonal) {
                g[(i, j)].abs()
            } else if theta[(i, j)] != 0.0 {
                (g[(i, j)] + lambda * theta[(i, j)].signum()).abs()
            } else {
                (g[(i, j)].abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Graphical lasso on a sample covariance, solved by ADMM on the split
/// `T = Z`: a log-det prox for `T` and soft-thresholding for `Z`.
///
/// Returns the sparse iterate `Z`, which is positive definite at
/// convergence; the dense iterate is returned instead if it is not.
pub fn graphical_lasso(
    cov: &Matrix,
    lambda: f64,
    penalize_diagonal: bool,
    config: &SolverConfig,
) -> Result<(Matrix, SolveTrace)> {
    config.validate()?;
    let n = cov.nrows();
    if !cov.is_square() || n == 0 {
        return Err(Error::BadDimension { expected: n, got: cov.ncols() });
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::BadInput("non-finite covariance entry".into()));
    }
    let scale = cov.amax().max(f64::MIN_POSITIVE);
    if max_asymmetry(cov) > 1e-10 * scale.max(1.0) {
        return Err(Error::NotSymmetric(max_asymmetry(cov)));
    }
    if !(lambda >= 0.0) {
        return Err(Error::BadParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let cov = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(cov.clone());
    let singular = eig.eigenvalues.min() <= 1e-12 * eig.eigenvalues.max().max(0.0);
    let mut trace = SolveTrace::default();
    if lambda == 0.0 {
        if singular {
            return Err(Error::NoMle);
        }
        let inv = eig.eigenvalues.map(|l| 1.0 / l);
        let v = &eig.eigenvectors;
        let theta = Matrix::from_fn(n, n, |i, k| v[(i, k)] * inv[k]) * v.transpose();
        let theta = (&theta + theta.transpose()) * 0.5;
        trace.record(glasso_objective(&theta, &cov, 0.0, penalize_diagonal), 0.0, 0.0);
        trace.converged = true;
        return Ok((theta, trace));
    }
    if !penalize_diagonal && (0..n).any(|i| cov[(i, i)] <= 0.0) {
        return Err(Error::NoMle);
    }

    let rho = config.rho;
    let mut z = Matrix::from_diagonal(&cov.diagonal().map(|d| 1.0 / (d + lambda)));
    let mut u = Matrix::zeros(n, n);
    let mut theta = z.clone();
    let kkt_scale = cov.amax().max(lambda).max(1.0);
    let sqrt_n = n as f64;
    for it in 0..config.max_iters {
        theta = prox_neg_logdet(&(&z - &u), &cov, rho);
        let z_old = z.clone();
        let a = &theta + &u;
        z = Matrix::from_fn(n, n, |i, j| {
            if penalized(i, j, penalize_diagonal) {
                soft_threshold(a[(i, j)], lambda / rho)
            } else {
                a[(i, j)]
            }
        });
        z = (&z + z.transpose()) * 0.5;
        u += &theta - &z;
        let r = (&theta - &z).norm();
        let s = rho * (&z - &z_old).norm();
        trace.record(glasso_objective(&theta, &cov, lambda, penalize_diagonal), r, s);
        let eps_pri = sqrt_n * config.feas_tol + config.tol * theta.norm().max(z.norm());
        let eps_dual = sqrt_n * config.feas_tol + config.tol * rho * u.norm();
        if (r <= eps_pri && s <= eps_dual) || it % 25 == 24 {
            if glasso_kkt_residual(&z, &cov, lambda, penalize_diagonal) <= 1e-6 * kkt_scale {
                trace.converged = true;
                break;
            }
        }
    }
    let out = if z.clone().cholesky().is_some() { z } else { theta };
    if !trace.converged {
        log::warn!("graphical lasso stopped after {} iterations without converging", trace.iters_used);
    }
    Ok((out, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unpenalized_is_inverse() {
        let cov = Matrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 1.5]);
        let (theta, trace) = graphical_lasso(&cov, 0.0, false, &SolverConfig::default()).unwrap();
        assert!(trace.converged);
        assert_relative_eq!(theta, cov.clone().try_inverse().unwrap(), max_relative = 1e-10);
    }

    #[test]
    fn singular_without_penalty_has_no_mle() {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(graphical_lasso(&cov, 0.0, false, &SolverConfig::default()).unwrap_err(), Error::NoMle);
        let (theta, trace) = graphical_lasso(&cov, 0.1, false, &SolverConfig::default()).unwrap();
        assert!(trace.converged);
        assert!(theta.clone().cholesky().is_some());
    }

    #[test]
    fn large_penalty_gives_diagonal() {
        let cov = Matrix::from_row_slice(3, 3, &[2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 1.5]);
        let (theta, trace) = graphical_lasso(&cov, 0.5, false, &SolverConfig::default()).unwrap();
        assert!(trace.converged);
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert_relative_eq!(theta[(i, i)], 1.0 / cov[(i, i)], max_relative = 1e-6);
                } else {
                    assert_eq!(theta[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn moderate_penalty_satisfies_kkt() {
        let cov = Matrix::from_row_slice(4, 4, &[
            1.0, 0.4, 0.1, 0.0, //
            0.4, 1.2, 0.3, 0.05, //
            0.1, 0.3, 0.9, 0.35, //
            0.0, 0.05, 0.35, 1.1,
        ]);
        for pen_diag in [false, true] {
            let (theta, trace) = graphical_lasso(&cov, 0.12, pen_diag, &SolverConfig::default()).unwrap();
            assert!(trace.converged);
            assert!(glasso_kkt_residual(&theta, &cov, 0.12, pen_diag) <= 1e-5);
            assert!(SymmetricEigen::new(theta).eigenvalues.min() > 0.0);
        }
    }
}
