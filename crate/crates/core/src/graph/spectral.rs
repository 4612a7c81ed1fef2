use std::ops::Range;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{max_asymmetry, Matrix, ShiftOperator, Vector, SYMMETRY_TOL};
use crate::error::{Error, Result};

/// Relative gap below which neighbouring eigenvalues are treated as one
/// degenerate block.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Orthonormal eigenbasis of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub vecs: Matrix,
    pub vals: Vector,
    /// Index ranges of eigenvalue clusters (size >= 2) whose eigenvectors are
    /// only defined up to rotation.
    pub degenerate_blocks: Vec<Range<usize>>,
}

impl SpectralBasis {
    /// Eigendecomposition of a symmetric matrix with the sign convention
    /// applied column by column.
    pub fn from_symmetric(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::BadDimension {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let scale = a.amax().max(1.0);
        let asym = max_asymmetry(a);
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let sym = (a + a.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let n = a.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let vals = Vector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut vecs = Matrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            normalize_sign(&mut col);
            vecs.set_column(dst, &col);
        }
        let degenerate_blocks = degenerate_blocks(&vals, DEGENERACY_TOL);
        Ok(Self {
            vecs,
            vals,
            degenerate_blocks,
        })
    }

    pub fn n(&self) -> usize {
        self.vals.len()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_blocks.is_empty()
    }

    /// Per-mode flag: true if the eigenvector sits in a degenerate block.
    pub fn ambiguous_modes(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n()];
        for block in &self.degenerate_blocks {
            for k in block.clone() {
                flags[k] = true;
            }
        }
        flags
    }

    /// `V diag(vals) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let scaled = Matrix::from_fn(self.n(), self.n(), |i, k| self.vecs[(i, k)] * self.vals[k]);
        scaled * self.vecs.transpose()
    }
}

/// Flips `v` so its largest-magnitude entry is positive; among entries tied
/// in magnitude the lowest index decides.
fn normalize_sign(v: &mut Vector) {
    let max = v.amax();
    if max == 0.0 {
        return;
    }
    let tol = 1e-12 * max;
    if let Some(pos) = v.iter().position(|x| x.abs() >= max - tol) {
        if v[pos] < 0.0 {
            v.neg_mut();
        }
    }
}

fn degenerate_blocks(vals: &Vector, tol: f64) -> Vec<Range<usize>> {
    let n = vals.len();
    let scale = vals.amax().max(1.0);
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || (vals[k] - vals[k - 1]).abs() > tol * scale {
            if k - start >= 2 {
                blocks.push(start..k);
            }
            start = k;
        }
    }
    blocks
}

/// Eigendecomposition of a symmetric shift operator.
pub fn eigendecompose(s: &ShiftOperator) -> Result<SpectralBasis> {
    if s.is_directed() {
        let asym = max_asymmetry(s.matrix());
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
    }
    SpectralBasis::from_symmetric(s.matrix())
}

/// Graph Fourier transform `V^T x`.
pub fn gft(x: &Vector, basis: &SpectralBasis) -> Result<Vector> {
    check_len(x, basis)?;
    Ok(basis.vecs.tr_mul(x))
}

/// Inverse graph Fourier transform `V x~`.
pub fn igft(xt: &Vector, basis: &SpectralBasis) -> Result<Vector> {
    check_len(xt, basis)?;
    Ok(&basis.vecs * xt)
}

fn check_len(x: &Vector, basis: &SpectralBasis) -> Result<()> {
    if x.len() != basis.n() {
        return Err(Error::BadDimension {
            expected: basis.n(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Which GFT coefficients a bandlimited approximation keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientOrder {
    /// The first `k` coefficients in ascending-frequency order.
    Freq,
    /// The `k` largest-magnitude coefficients.
    #[default]
    Magnitude,
}

/// Keeps `k` GFT coefficients of `x` and synthesizes the approximation.
/// Returns the reconstruction and `||x - x_hat|| / ||x||`.
pub fn bandlimit_reconstruct(
    x: &Vector,
    basis: &SpectralBasis,
    k: usize,
    order: CoefficientOrder,
) -> Result<(Vector, f64)> {
    let n = basis.n();
    if k < 1 || k > n {
        return Err(Error::BadK { k, lo: 1, hi: n });
    }
    let coeffs = gft(x, basis)?;
    let mut idx: Vec<usize> = (0..n).collect();
    if order == CoefficientOrder::Magnitude {
        // stable sort keeps lower frequencies first among equal magnitudes
        idx.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()));
    }
    let mut kept = Vector::zeros(n);
    for &i in idx.iter().take(k) {
        kept[i] = coeffs[i];
    }
    let xhat = igft(&kept, basis)?;
    let norm = x.norm();
    let rel = if norm == 0.0 { 0.0 } else { (x - &xhat).norm() / norm };
    Ok((xhat, rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_shift, total_variation, ShiftKind};
    use approx::assert_abs_diff_eq;

    fn two_path() -> ShiftOperator {
        build_shift(&[(0, 1, 1.0)], 2, ShiftKind::Laplacian).unwrap()
    }

    #[test]
    fn two_path_basis() {
        let b = eigendecompose(&two_path()).unwrap();
        assert_abs_diff_eq!(b.vals[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.vals[1], 2.0, epsilon = 1e-12);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = Matrix::from_row_slice(2, 2, &[r, r, r, -r]);
        assert_abs_diff_eq!(b.vecs, expected, epsilon = 1e-12);
    }

    #[test]
    fn identity_basis_is_identity() {
        let b = SpectralBasis::from_symmetric(&Matrix::identity(4, 4)).unwrap();
        assert_abs_diff_eq!(b.vecs, Matrix::identity(4, 4), epsilon = 1e-12);
        assert_eq!(b.degenerate_blocks, vec![0..4]);
    }

    #[test]
    fn diagonal_sorted() {
        let b = SpectralBasis::from_symmetric(&Matrix::from_diagonal(&Vector::from_vec(vec![
            3.0, 1.0,
        ])))
        .unwrap();
        assert_eq!(b.vals.as_slice(), &[1.0, 3.0]);
        let p = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(b.vecs, p, epsilon = 1e-12);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(SpectralBasis::from_symmetric(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn gft_constant_signal() {
        let b = eigendecompose(&two_path()).unwrap();
        let xt = gft(&Vector::from_vec(vec![1.0, 1.0]), &b).unwrap();
        assert_abs_diff_eq!(xt[0], 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(xt[1], 0.0, epsilon = 1e-12);
        let e1 = Vector::from_vec(vec![0.0, 1.0]);
        assert_abs_diff_eq!(igft(&e1, &b).unwrap(), b.vecs.column(1).into_owned(), epsilon = 0.0);
        assert!(matches!(gft(&Vector::zeros(3), &b), Err(Error::BadDimension { .. })));
    }

    #[test]
    fn tv_of_eigenvectors() {
        let l = build_shift(&[(0, 1, 1.0), (1, 2, 2.5), (2, 3, 0.3), (0, 3, 1.1)], 4, ShiftKind::Laplacian)
            .unwrap();
        let b = eigendecompose(&l).unwrap();
        for k in 0..4 {
            let v = b.vecs.column(k).into_owned();
            assert_abs_diff_eq!(total_variation(&v, &l).unwrap(), b.vals[k].max(0.0), epsilon = 1e-10);
        }
    }

    #[test]
    fn bandlimit_bounds() {
        let l = build_shift(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], 4, ShiftKind::Laplacian).unwrap();
        let b = eigendecompose(&l).unwrap();
        let v1 = b.vecs.column(1).into_owned();
        let (_, rel) = bandlimit_reconstruct(&v1, &b, 1, CoefficientOrder::Magnitude).unwrap();
        assert!(rel <= 1e-12);
        let x = Vector::from_vec(vec![0.3, -1.0, 2.0, 0.7]);
        let (_, rel) = bandlimit_reconstruct(&x, &b, 4, CoefficientOrder::Freq).unwrap();
        assert!(rel <= 1e-12);
        assert!(matches!(
            bandlimit_reconstruct(&x, &b, 0, CoefficientOrder::Freq),
            Err(Error::BadK { .. })
        ));
        assert!(bandlimit_reconstruct(&x, &b, 5, CoefficientOrder::Freq).is_err());
    }
}
