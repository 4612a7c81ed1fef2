//! Graph-shift operators and the graph signal processing primitives built on
//! them: spectral bases, the graph Fourier transform, total variation,
//! polynomial graph filters and stationarity diagnostics.

mod filter;
mod signal;
mod spectral;
mod stationarity;

pub use filter::{apply_filter, filter_freq_response, filter_matrix, FilterSpec};
pub use signal::SignalSet;
pub use spectral::{
    bandlimit_reconstruct, eigendecompose, gft, igft, CoefficientOrder, SpectralBasis,
};
pub use stationarity::{graph_psd, stationarity_score, GraphPsd, DEFAULT_PSD_THRESHOLD};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute tolerance used for symmetry checks on undirected shifts.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Absolute tolerance on Laplacian row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    Adjacency,
    Laplacian,
    Precision,
    Generic,
}

impl ShiftKind {
    pub fn name(self) -> &'static str {
        match self {
            ShiftKind::Adjacency => "adjacency",
            ShiftKind::Laplacian => "laplacian",
            ShiftKind::Precision => "precision",
            ShiftKind::Generic => "generic",
        }
    }
}

impl std::str::FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adjacency" => Ok(ShiftKind::Adjacency),
            "laplacian" => Ok(ShiftKind::Laplacian),
            "precision" => Ok(ShiftKind::Precision),
            "generic" => Ok(ShiftKind::Generic),
            other => Err(Error::Parse(format!("unknown shift kind '{other}'"))),
        }
    }
}

/// A dense graph-shift operator: an N x N matrix whose sparsity pattern
/// (off the diagonal) is the edge set of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOperator {
    data: Matrix,
    kind: ShiftKind,
    directed: bool,
}

impl ShiftOperator {
    /// Wraps a matrix after checking the invariants of `kind`.
    pub fn new(data: Matrix, kind: ShiftKind, directed: bool) -> Result<Self> {
        if !data.is_square() {
            return Err(Error::BadDimension {
                expected: data.nrows(),
                got: data.ncols(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadInput("non-finite entry in shift operator".into()));
        }
        if !directed {
            let asym = max_asymmetry(&data);
            if asym > SYMMETRY_TOL {
                return Err(Error::NotSymmetric(asym));
            }
        }
        let n = data.nrows();
        match kind {
            ShiftKind::Adjacency => {
                for i in 0..n {
                    if data[(i, i)] != 0.0 {
                        return Err(Error::InvalidWeight { i, j: i, weight: data[(i, i)] });
                    }
                    for j in 0..n {
                        if data[(i, j)] < 0.0 {
                            return Err(Error::InvalidWeight { i, j, weight: data[(i, j)] });
                        }
                    }
                }
            }
            ShiftKind::Laplacian => {
                for i in 0..n {
                    let row_sum: f64 = data.row(i).iter().sum();
                    let scale = data[(i, i)].abs().max(1.0);
                    if row_sum.abs() > ROW_SUM_TOL * scale {
                        return Err(Error::BadInput(format!(
                            "laplacian row {i} sums to {row_sum:.3e}"
                        )));
                    }
                    for j in 0..n {
                        if i != j && data[(i, j)] > 0.0 {
                            return Err(Error::InvalidWeight { i, j, weight: -data[(i, j)] });
                        }
                    }
                }
                // zero row sums with nonpositive off-diagonals make L diagonally
                // dominant, hence PSD
            }
            ShiftKind::Precision | ShiftKind::Generic => {}
        }
        Ok(Self { data, kind, directed })
    }

    /// Symmetrizes `data` and snaps tiny violations of the kind's sign
    /// pattern before validating. Used for solver outputs.
    pub fn from_estimate(mut data: Matrix, kind: ShiftKind) -> Result<Self> {
        let sym = (&data + data.transpose()) * 0.5;
        data = sym;
        let n = data.nrows();
        match kind {
            ShiftKind::Adjacency => {
                for i in 0..n {
                    data[(i, i)] = 0.0;
                    for j in 0..n {
                        if data[(i, j)] < 0.0 {
                            data[(i, j)] = 0.0;
                        }
                    }
                }
            }
            ShiftKind::Laplacian => {
                for i in 0..n {
                    for j in 0..n {
                        if i != j && data[(i, j)] > 0.0 {
                            data[(i, j)] = 0.0;
                        }
                    }
                }
                for i in 0..n {
                    let off: f64 = (0..n).filter(|&j| j != i).map(|j| data[(i, j)]).sum();
                    data[(i, i)] = -off;
                }
            }
            _ => {}
        }
        Self::new(data, kind, false)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Nonnegative edge weights W implied by the operator: the matrix itself
    /// for adjacency-like kinds, `-offdiag(L)` for Laplacians and `|offdiag|`
    /// otherwise.
    pub fn weights(&self) -> Matrix {
        let n = self.n();
        Matrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                match self.kind {
                    ShiftKind::Adjacency => self.data[(i, j)],
                    ShiftKind::Laplacian => -self.data[(i, j)],
                    _ => self.data[(i, j)].abs(),
                }
            }
        })
    }

    /// Edges `(i, j, w)` with `|w| > threshold`. Undirected operators list
    /// each pair once with `i < j`.
    pub fn edges(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || (!self.directed && j < i) {
                    continue;
                }
                let w = match self.kind {
                    ShiftKind::Laplacian => -self.data[(i, j)],
                    _ => self.data[(i, j)],
                };
                if w.abs() > threshold {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Combinatorial Laplacian `diag(W1) - W` of the weights.
    pub fn laplacian(&self) -> Result<ShiftOperator> {
        if self.directed {
            return Err(Error::WrongKind {
                expected: "undirected",
                got: "directed",
            });
        }
        let w = self.weights();
        if w.iter().any(|&v| v < 0.0) {
            return Err(Error::WrongKind {
                expected: "nonnegative-weight",
                got: self.kind.name(),
            });
        }
        ShiftOperator::new(laplacian_from_weights(&w), ShiftKind::Laplacian, false)
    }
}

/// Largest `|A_ij - A_ji|`.
pub fn max_asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// `diag(W1) - W` for a weight matrix with zero diagonal.
pub fn laplacian_from_weights(w: &Matrix) -> Matrix {
    let n = w.nrows();
    let mut l = -w.clone();
    for i in 0..n {
        l[(i, i)] = 0.0;
        let deg: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        l[(i, i)] = deg;
    }
    l
}

/// Builds an undirected shift from a weighted edge list. Repeated edges
/// accumulate.
pub fn build_shift(edges: &[(usize, usize, f64)], n: usize, kind: ShiftKind) -> Result<ShiftOperator> {
    let mut w = Matrix::zeros(n, n);
    for &(i, j, weight) in edges {
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::BadIndex { index: idx, n });
            }
        }
        if !weight.is_finite() {
            return Err(Error::InvalidWeight { i, j, weight });
        }
        match kind {
            ShiftKind::Adjacency | ShiftKind::Laplacian => {
                if weight < 0.0 {
                    return Err(Error::InvalidWeight { i, j, weight });
                }
                if i == j {
                    if kind == ShiftKind::Adjacency {
                        return Err(Error::BadInput(format!("self-loop at vertex {i}")));
                    }
                    // self-loops do not change a combinatorial Laplacian
                    continue;
                }
                w[(i, j)] += weight;
                if i != j {
                    w[(j, i)] += weight;
                }
            }
            ShiftKind::Precision | ShiftKind::Generic => {
                w[(i, j)] += weight;
                if i != j {
                    w[(j, i)] += weight;
                }
            }
        }
    }
    let data = match kind {
        ShiftKind::Laplacian => laplacian_from_weights(&w),
        _ => w,
    };
    ShiftOperator::new(data, kind, false)
}

/// Total variation `x^T L x` of a signal with respect to a Laplacian.
pub fn total_variation(x: &Vector, l: &ShiftOperator) -> Result<f64> {
    if l.kind() != ShiftKind::Laplacian {
        return Err(Error::WrongKind {
            expected: "laplacian",
            got: l.kind().name(),
        });
    }
    if x.len() != l.n() {
        return Err(Error::BadDimension {
            expected: l.n(),
            got: x.len(),
        });
    }
    let lx = l.matrix() * x;
    Ok(x.dot(&lx).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_edge_laplacian() {
        let l = build_shift(&[(0, 1, 1.0)], 2, ShiftKind::Laplacian).unwrap();
        assert_eq!(l.matrix(), &Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn empty_adjacency() {
        let a = build_shift(&[], 3, ShiftKind::Adjacency).unwrap();
        assert_eq!(a.matrix(), &Matrix::zeros(3, 3));
    }

    #[test]
    fn weighted_path_laplacian() {
        let l = build_shift(&[(0, 1, 2.0), (1, 2, 1.0)], 3, ShiftKind::Laplacian).unwrap();
        let expected =
            Matrix::from_row_slice(3, 3, &[2.0, -2.0, 0.0, -2.0, 3.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(l.matrix(), &expected);
        let a = build_shift(&[(0, 1, 2.0), (1, 2, 1.0)], 3, ShiftKind::Adjacency).unwrap();
        assert_eq!(a.laplacian().unwrap().matrix(), &expected);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            build_shift(&[(0, 1, -1.0)], 2, ShiftKind::Adjacency),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(matches!(
            build_shift(&[(0, 2, 1.0)], 2, ShiftKind::Laplacian),
            Err(Error::BadIndex { index: 2, n: 2 })
        ));
        assert!(build_shift(&[(1, 1, 1.0)], 2, ShiftKind::Adjacency).is_err());
    }

    #[test]
    fn asymmetric_undirected_rejected() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(
            ShiftOperator::new(m.clone(), ShiftKind::Generic, false),
            Err(Error::NotSymmetric(_))
        ));
        assert!(ShiftOperator::new(m, ShiftKind::Generic, true).is_ok());
    }

    #[test]
    fn tv_two_path() {
        let l = build_shift(&[(0, 1, 2.0)], 2, ShiftKind::Laplacian).unwrap();
        let x = Vector::from_vec(vec![1.0, 3.0]);
        assert_abs_diff_eq!(total_variation(&x, &l).unwrap(), 8.0, epsilon = 1e-12);
        let c = Vector::from_element(2, 4.2);
        assert_abs_diff_eq!(total_variation(&c, &l).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tv_requires_laplacian() {
        let a = build_shift(&[(0, 1, 2.0)], 2, ShiftKind::Adjacency).unwrap();
        let x = Vector::from_vec(vec![1.0, 3.0]);
        assert!(matches!(total_variation(&x, &a), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn edges_listed_once() {
        let a = build_shift(&[(0, 1, 2.0), (2, 1, 0.5)], 3, ShiftKind::Adjacency).unwrap();
        assert_eq!(a.edges(0.0), vec![(0, 1, 2.0), (1, 2, 0.5)]);
        let l = a.laplacian().unwrap();
        assert_eq!(l.edges(0.0), vec![(0, 1, 2.0), (1, 2, 0.5)]);
    }
}
