use nalgebra::SymmetricEigen;

use crate::graph::{Matrix, Vector};

/// Proximal step of the Gaussian negative log-likelihood:
/// `argmin_{T > 0} -logdet T + tr(C T) + rho/2 ||T - A||_F^2`.
///
/// Stationarity gives `rho T - T^{-1} = rho A - C`, so with
/// `rho A - C = Q diag(g) Q^T` the minimizer is `Q diag(t) Q^T` where
/// `t = (g + sqrt(g^2 + 4 rho)) / (2 rho) > 0`.
pub fn prox_neg_logdet(a: &Matrix, cov: &Matrix, rho: f64) -> Matrix {
    assert!(rho > 0.0, "rho must be positive");
    let m = a * rho - cov;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let t: Vector = eig.eigenvalues.map(|g| {
        let disc = (g * g + 4.0 * rho).sqrt();
        if g >= 0.0 {
            (g + disc) / (2.0 * rho)
        } else {
            // same root, written to avoid cancellation for large negative g
            2.0 / (disc - g)
        }
    });
    let q = &eig.eigenvectors;
    let scaled = Matrix::from_fn(q.nrows(), q.ncols(), |i, k| q[(i, k)] * t[k]);
    let out = scaled * q.transpose();
    (&out + out.transpose()) * 0.5
}
