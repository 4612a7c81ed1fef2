use serde::{Deserialize, Serialize};

use super::{Matrix, ShiftOperator, SpectralBasis, Vector};
use crate::error::{Error, Result};

/// Coefficients `h_0 .. h_{L-1}` of the polynomial graph filter
/// `H = sum_l h_l S^l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    coeffs: Vec<f64>,
}

impl FilterSpec {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::BadParameter("filter needs at least one tap".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::BadParameter("non-finite filter tap".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Scalar frequency response `sum_l h_l lambda^l`.
    pub fn response_at(&self, lambda: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &h| acc * lambda + h)
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.coeffs.len() > n {
            return Err(Error::BadParameter(format!(
                "filter length {} exceeds graph size {n}",
                self.coeffs.len()
            )));
        }
        Ok(())
    }
}

/// `y = sum_l h_l S^l x`, evaluated with Horner's rule on iterated shifts.
pub fn apply_filter(s: &ShiftOperator, h: &FilterSpec, x: &Vector) -> Result<Vector> {
    let n = s.n();
    if x.len() != n {
        return Err(Error::BadDimension {
            expected: n,
            got: x.len(),
        });
    }
    h.check(n)?;
    let mut taps = h.coeffs.iter().rev();
    let mut y = x * *taps.next().expect("nonempty filter");
    for &c in taps {
        y = s.matrix() * y;
        y.axpy(c, x, 1.0);
    }
    Ok(y)
}

/// Dense filter matrix `H = sum_l h_l S^l`.
pub fn filter_matrix(s: &ShiftOperator, h: &FilterSpec) -> Result<Matrix> {
    let n = s.n();
    h.check(n)?;
    let mut taps = h.coeffs.iter().rev();
    let mut acc = Matrix::identity(n, n) * *taps.next().expect("nonempty filter");
    for &c in taps {
        acc = s.matrix() * acc;
        for i in 0..n {
            acc[(i, i)] += c;
        }
    }
    Ok(acc)
}

/// Frequency response `h~ = Psi h`, `Psi_kl = lambda_k^l`.
pub fn filter_freq_response(h: &FilterSpec, basis: &SpectralBasis) -> Vector {
    basis.vals.map(|lam| h.response_at(lam))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_shift, eigendecompose, gft, ShiftKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn directed_cycle_shifts() {
        let n = 5;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            a[((i + 1) % n, i)] = 1.0;
        }
        let s = ShiftOperator::new(a, ShiftKind::Adjacency, true).unwrap();
        let x = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = apply_filter(&s, &FilterSpec::new(vec![0.0, 1.0]).unwrap(), &x).unwrap();
        assert_eq!(y.as_slice(), &[5.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn identity_and_two_tap() {
        let l = build_shift(&[(0, 1, 1.0)], 2, ShiftKind::Laplacian).unwrap();
        let x = Vector::from_vec(vec![1.0, 0.0]);
        let y = apply_filter(&l, &FilterSpec::new(vec![1.0]).unwrap(), &x).unwrap();
        assert_eq!(y, x);
        let y = apply_filter(&l, &FilterSpec::new(vec![1.0, 1.0]).unwrap(), &x).unwrap();
        assert_eq!(y.as_slice(), &[2.0, -1.0]);
        assert!(apply_filter(&l, &FilterSpec::new(vec![1.0, 1.0, 1.0]).unwrap(), &x).is_err());
    }

    #[test]
    fn frequency_response() {
        let l = build_shift(&[(0, 1, 1.0)], 2, ShiftKind::Laplacian).unwrap();
        let b = eigendecompose(&l).unwrap();
        let r = filter_freq_response(&FilterSpec::new(vec![1.0, 1.0]).unwrap(), &b);
        assert_abs_diff_eq!(r, Vector::from_vec(vec![1.0, 3.0]), epsilon = 1e-12);
        let r = filter_freq_response(&FilterSpec::new(vec![2.5]).unwrap(), &b);
        assert_eq!(r, Vector::from_element(2, 2.5));
        let r = filter_freq_response(&FilterSpec::new(vec![0.0, 1.0]).unwrap(), &b);
        assert_eq!(r, b.vals);
    }

    #[test]
    fn convolution_theorem() {
        let a = build_shift(
            &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 0, 1.0), (1, 3, 0.7)],
            4,
            ShiftKind::Adjacency,
        )
        .unwrap();
        let b = eigendecompose(&a).unwrap();
        let h = FilterSpec::new(vec![0.3, -1.0, 0.25, 0.1]).unwrap();
        let x = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let lhs = gft(&apply_filter(&a, &h, &x).unwrap(), &b).unwrap();
        let rhs = filter_freq_response(&h, &b).component_mul(&gft(&x, &b).unwrap());
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
        let hm = filter_matrix(&a, &h).unwrap();
        assert_abs_diff_eq!(&hm * &x, apply_filter(&a, &h, &x).unwrap(), epsilon = 1e-12);
    }
}
