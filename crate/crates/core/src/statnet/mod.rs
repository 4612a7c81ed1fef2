//! Statistical topology inference: correlation and partial-correlation
//! networks with multiple testing, the graphical lasso, Laplacian-constrained
//! GMRF estimation and neighborhood lasso selection.

mod glasso;
mod lgmrf;
mod nlasso;

pub use glasso::{glasso_kkt_residual, glasso_objective, graphical_lasso};
pub use lgmrf::{laplacian_gmrf, lgmrf_objective, LaplacianGmrf};
pub use nlasso::{neighborhood_lasso, CombineRule, NeighborhoodFit};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::graph::{Matrix, ShiftKind, ShiftOperator, SignalSet};

/// `(1/P) sum_p x_p x_p^T`, after removing the row means when `centered`.
pub fn sample_covariance(x: &SignalSet, centered: bool) -> Result<Matrix> {
    let p = x.p();
    if centered && p < 2 {
        return Err(Error::TooFewSamples { need: 2, got: p });
    }
    let mut data = x.data().clone();
    if centered {
        for mut row in data.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
    }
    let cov = &data * data.transpose() / p as f64;
    Ok((&cov + cov.transpose()) * 0.5)
}

/// One hypothesis test on the vertex pair `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub i: usize,
    pub j: usize,
    /// Estimated (partial) correlation.
    pub rho: f64,
    /// Fisher z statistic standardized by its null deviation.
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    /// `|rho| = 1`: the statistic is unbounded and the p-value set to 0.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTable {
    pub pairs: Vec<PairTest>,
    pub method: String,
    pub q: f64,
}

impl TestTable {
    pub fn rejected(&self) -> impl Iterator<Item = &PairTest> {
        self.pairs.iter().filter(|t| t.reject)
    }
}

/// Benjamini-Hochberg step-up: rejects the `k` smallest p-values, where `k`
/// is the largest index with `p_(k) <= k q / m`.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut cutoff = 0;
    for (rank, &idx) in order.iter().enumerate() {
        if p_values[idx] <= (rank + 1) as f64 * q / m as f64 {
            cutoff = rank + 1;
        }
    }
    let mut reject = vec![false; m];
    for &idx in &order[..cutoff] {
        reject[idx] = true;
    }
    reject
}

const SATURATION: f64 = 1.0 - 1e-12;

/// Fisher-z tests of `rho_ij = 0` with null variance `1 / dof`, BH at
/// level `q`, and the adjacency weighted by `|rho|` on rejected pairs.
fn fisher_network(rho: &Matrix, dof: f64, q: f64, method: &str) -> Result<(TestTable, ShiftOperator)> {
    let n = rho.nrows();
    let sd = dof.sqrt();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = rho[(i, j)];
            let saturated = r.abs() >= SATURATION;
            let (statistic, p_value) = if saturated {
                (f64::INFINITY.copysign(r), 0.0)
            } else {
                let z = r.atanh() * sd;
                (z, erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
            };
            if saturated {
                log::warn!("pair ({i}, {j}) is perfectly correlated; p-value set to 0");
            }
            pairs.push(PairTest { i, j, rho: r, statistic, p_value, reject: false, saturated });
        }
    }
    let pv: Vec<f64> = pairs.iter().map(|t| t.p_value).collect();
    let mut w = Matrix::zeros(n, n);
    for (t, rej) in pairs.iter_mut().zip(benjamini_hochberg(&pv, q)) {
        t.reject = rej;
        if rej {
            w[(t.i, t.j)] = t.rho.abs().min(1.0);
            w[(t.j, t.i)] = w[(t.i, t.j)];
        }
    }
    let table = TestTable { pairs, method: method.to_string(), q };
    Ok((table, ShiftOperator::new(w, ShiftKind::Adjacency, false)?))
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::BadParameter(format!("FDR level {q} outside (0, 1]")));
    }
    Ok(())
}

/// Normalizes a covariance-like matrix to unit diagonal. Zero-variance
/// vertices get zero correlation with everything.
fn normalize(c: &Matrix) -> Matrix {
    let n = c.nrows();
    Matrix::from_fn(n, n, |i, j| {
        let d = (c[(i, i)] * c[(j, j)]).sqrt();
        if i == j {
            1.0
        } else if d > 0.0 {
            (c[(i, j)] / d).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Pearson correlation network with Fisher-z tests and BH control at `q`.
pub fn correlation_network(x: &SignalSet, q: f64) -> Result<(TestTable, ShiftOperator)> {
    check_q(q)?;
    if x.p() < 4 {
        return Err(Error::TooFewSamples { need: 4, got: x.p() });
    }
    let rho = normalize(&sample_covariance(x, true)?);
    fisher_network(&rho, x.p() as f64 - 3.0, q, "correlation")
}

/// Partial correlations `-theta_ij / sqrt(theta_ii theta_jj)` from a
/// precision matrix.
pub fn partial_correlations(theta: &Matrix) -> Matrix {
    let n = theta.nrows();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            -theta[(i, j)] / (theta[(i, i)] * theta[(j, j)]).sqrt()
        }
    })
}

/// Partial-correlation network. The Fisher null variance is
/// `1 / (P - N - 1)`. With `ridge`, the covariance is regularized by
/// `1e-3 tr(S)/N` before inversion, which also allows `P <= N + 1`; the
/// degrees of freedom are then floored at 1.
pub fn partial_correlation_network(x: &SignalSet, q: f64, ridge: bool) -> Result<(TestTable, ShiftOperator)> {
    check_q(q)?;
    let (n, p) = (x.n(), x.p());
    if !ridge && p < n + 2 {
        return Err(Error::TooFewSamples { need: n + 2, got: p });
    }
    if p < 2 {
        return Err(Error::TooFewSamples { need: 2, got: p });
    }
    let mut cov = sample_covariance(x, true)?;
    if ridge {
        let delta = 1e-3 * cov.trace() / n as f64;
        for i in 0..n {
            cov[(i, i)] += delta;
        }
    }
    let eig = SymmetricEigen::new(cov.clone());
    let top = eig.eigenvalues.max();
    if !(top > 0.0) || eig.eigenvalues.min() <= 1e-12 * top {
        return Err(Error::SingularCovariance);
    }
    let inv = eig.eigenvalues.map(|l| 1.0 / l);
    let v = &eig.eigenvectors;
    let theta = Matrix::from_fn(n, n, |i, k| v[(i, k)] * inv[k]) * v.transpose();
    let dof = (p as f64 - n as f64 - 1.0).max(1.0);
    fisher_network(&partial_correlations(&theta), dof, q, "partial_correlation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn covariance_examples() {
        let x = SignalSet::new(Matrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0])).unwrap();
        let c = sample_covariance(&x, false).unwrap();
        assert_abs_diff_eq!(c, x.data() * x.data().transpose(), epsilon = 1e-15);
        assert!(sample_covariance(&x, true).is_err());

        let x = SignalSet::new(Matrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0])).unwrap();
        let mut expected = Matrix::zeros(3, 3);
        expected[(0, 0)] = 1.0;
        assert_abs_diff_eq!(sample_covariance(&x, true).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn bh_hand_example() {
        assert_eq!(benjamini_hochberg(&[0.001, 0.02, 0.04, 0.3], 0.05), vec![true, true, false, false]);
        // step-up: a later passing rank rescues earlier failures
        assert_eq!(benjamini_hochberg(&[0.04, 0.03, 0.035, 0.04], 0.05), vec![true, true, true, true]);
        assert_eq!(benjamini_hochberg(&[0.9, 0.8], 0.05), vec![false, false]);
    }

    #[test]
    fn duplicated_rows_saturate() {
        let data = Matrix::from_row_slice(3, 5, &[
            1.0, 2.0, -1.0, 0.5, 3.0, //
            1.0, 2.0, -1.0, 0.5, 3.0, //
            0.3, -0.2, 0.9, 1.1, -0.4,
        ]);
        let (table, w) = correlation_network(&SignalSet::new(data).unwrap(), 0.05).unwrap();
        let t = &table.pairs[0];
        assert!(t.saturated && t.reject && t.p_value == 0.0);
        assert_abs_diff_eq!(w.matrix()[(0, 1)], 1.0, epsilon = 1e-12);
        assert_eq!(table.pairs.len(), 3);
    }

    #[test]
    fn too_few_samples() {
        let x = SignalSet::new(Matrix::from_element(3, 3, 1.0)).unwrap();
        assert_eq!(correlation_network(&x, 0.1).unwrap_err(), Error::TooFewSamples { need: 4, got: 3 });
        assert!(partial_correlation_network(&x, 0.1, false).is_err());
    }

    #[test]
    fn chain_partial_correlations() {
        let theta = Matrix::from_row_slice(3, 3, &[1.0, -0.4, 0.0, -0.4, 1.0, -0.4, 0.0, -0.4, 1.0]);
        let r = partial_correlations(&theta);
        assert_eq!(r[(0, 2)], 0.0);
        assert_abs_diff_eq!(r[(0, 1)], 0.4, epsilon = 1e-15);
        let diag = partial_correlations(&Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0])));
        assert_eq!(diag[(0, 1)], 0.0);
    }
}
