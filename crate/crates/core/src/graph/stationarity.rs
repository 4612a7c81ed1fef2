use super::{Matrix, SpectralBasis, Vector};

/// Score below which a covariance counts as diagonalized by the basis.
pub const DEFAULT_PSD_THRESHOLD: f64 = 1e-6;

/// Off-diagonal energy ratio `||offdiag(V^T C V)||_F / ||V^T C V||_F`.
/// Zero iff the basis diagonalizes the covariance.
pub fn stationarity_score(cov: &Matrix, basis: &SpectralBasis) -> f64 {
    let c = basis.vecs.tr_mul(cov) * &basis.vecs;
    let total = c.norm();
    if total == 0.0 {
        return 0.0;
    }
    let diag: f64 = c.diagonal().norm_squared();
    let off = (c.norm_squared() - diag).max(0.0).sqrt();
    (off / total).clamp(0.0, 1.0)
}

/// Graph power spectral density together with the stationarity score it
/// was computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPsd {
    pub values: Vector,
    pub score: f64,
    /// False when the score exceeds the threshold; the values are then only
    /// the diagonal of a non-diagonal spectral covariance.
    pub stationary: bool,
}

/// `p = diag(V^T C V)` clipped at zero.
pub fn graph_psd(cov: &Matrix, basis: &SpectralBasis, threshold: f64) -> GraphPsd {
    let c = basis.vecs.tr_mul(cov) * &basis.vecs;
    let values = c.diagonal().map(|p| p.max(0.0));
    let score = stationarity_score(cov, basis);
    let stationary = score <= threshold;
    if !stationary {
        log::warn!("covariance is not diagonalized by the basis (score {score:.3e})");
    }
    GraphPsd {
        values,
        score,
        stationary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_shift, eigendecompose, filter_matrix, FilterSpec, ShiftKind};
    use approx::assert_abs_diff_eq;

    fn two_path_basis() -> SpectralBasis {
        eigendecompose(&build_shift(&[(0, 1, 1.0)], 2, ShiftKind::Laplacian).unwrap()).unwrap()
    }

    #[test]
    fn white_noise_is_stationary() {
        let b = two_path_basis();
        assert_eq!(stationarity_score(&Matrix::identity(2, 2), &b), 0.0);
        let p = graph_psd(&(Matrix::identity(2, 2) * 2.0), &b, DEFAULT_PSD_THRESHOLD);
        assert!(p.stationary);
        assert_abs_diff_eq!(p.values, Vector::from_element(2, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn diagonal_covariance_on_path_is_not() {
        let b = two_path_basis();
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        // V^T C V = [[1.5, -0.5], [-0.5, 1.5]]
        let expected = (0.5f64.powi(2) * 2.0).sqrt() / (2.0 * 1.5f64.powi(2) + 0.5).sqrt();
        assert_abs_diff_eq!(stationarity_score(&cov, &b), expected, epsilon = 1e-12);
        assert!(!graph_psd(&cov, &b, DEFAULT_PSD_THRESHOLD).stationary);
    }

    #[test]
    fn filtered_white_noise_psd() {
        let l = build_shift(&[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5)], 3, ShiftKind::Laplacian)
            .unwrap();
        let b = eigendecompose(&l).unwrap();
        let h = FilterSpec::new(vec![1.0, -0.2, 0.05]).unwrap();
        let hm = filter_matrix(&l, &h).unwrap();
        let cov = &hm * hm.transpose();
        assert!(stationarity_score(&cov, &b) <= 1e-10);
        let p = graph_psd(&cov, &b, DEFAULT_PSD_THRESHOLD);
        for k in 0..3 {
            assert_abs_diff_eq!(p.values[k], h.response_at(b.vals[k]).powi(2), epsilon = 1e-10);
        }
    }
}
