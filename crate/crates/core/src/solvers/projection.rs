use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Matrix;

use super::SolverConfig;

/// Which family of shift operators is admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Symmetric, nonnegative, zero diagonal, plus a scale normalization.
    AdjacencySet,
    /// Symmetric, nonpositive off-diagonal, zero row sums, `trace = N`.
    LaplacianSet,
}

/// How an adjacency set rules out the all-zero solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    /// Weighted degree of vertex 0 equals one.
    #[default]
    FirstNodeDegreeOne,
    /// Sum of all entries equals N.
    TotalWeightN,
}

/// The convex set of admissible shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftConstraintSet {
    pub kind: ConstraintKind,
    #[serde(default)]
    pub scale: ScaleRule,
}

impl ShiftConstraintSet {
    pub fn adjacency(scale: ScaleRule) -> Self {
        Self {
            kind: ConstraintKind::AdjacencySet,
            scale,
        }
    }

    pub fn laplacian() -> Self {
        Self {
            kind: ConstraintKind::LaplacianSet,
            scale: ScaleRule::TotalWeightN,
        }
    }

    /// Sign pattern `G` with `||S||_1 = <G, S>` for every member `S`.
    pub fn l1_sign_pattern(&self, n: usize) -> Matrix {
        match self.kind {
            ConstraintKind::AdjacencySet => Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }),
            ConstraintKind::LaplacianSet => Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { -1.0 }),
        }
    }

    /// Linear equality constraints of the set, as `(normal, value)` pairs
    /// on the Frobenius inner product.
    pub fn equalities(&self, n: usize) -> Vec<(Matrix, f64)> {
        let mut out = Vec::new();
        match self.kind {
            ConstraintKind::AdjacencySet => {
                for i in 0..n {
                    let mut e = Matrix::zeros(n, n);
                    e[(i, i)] = 1.0;
                    out.push((e, 0.0));
                }
                out.push(self.scale_functional(n));
            }
            ConstraintKind::LaplacianSet => {
                for i in 0..n {
                    let mut e = Matrix::zeros(n, n);
                    e.row_mut(i).fill(1.0);
                    out.push((e, 0.0));
                }
                out.push((Matrix::identity(n, n), n as f64));
            }
        }
        out
    }

    fn scale_functional(&self, n: usize) -> (Matrix, f64) {
        match self.scale {
            ScaleRule::FirstNodeDegreeOne => {
                let mut g = Matrix::zeros(n, n);
                g.column_mut(0).fill(1.0);
                (g, 1.0)
            }
            ScaleRule::TotalWeightN => (Matrix::from_element(n, n, 1.0), n as f64),
        }
    }

    /// Largest violation of any constraint in the set.
    pub fn violation(&self, s: &Matrix) -> f64 {
        let n = s.nrows();
        let mut worst = crate::graph::max_asymmetry(s);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = s[(i, j)];
                worst = worst.max(match self.kind {
                    ConstraintKind::AdjacencySet => (-v).max(0.0),
                    ConstraintKind::LaplacianSet => v.max(0.0),
                });
            }
        }
        for (g, c) in self.equalities(n) {
            worst = worst.max((g.dot(s) - c).abs());
        }
        worst
    }

    /// Euclidean projection onto the set. Adjacency sets have a closed form;
    /// Laplacian sets go through Dykstra's algorithm.
    pub fn project(&self, m: &Matrix, config: &SolverConfig) -> Result<Matrix> {
        match self.kind {
            ConstraintKind::AdjacencySet => Ok(self.project_adjacency(m)),
            ConstraintKind::LaplacianSet => dykstra_project(m, self, config),
        }
    }

    /// Closed-form projection onto an adjacency set: clip the symmetric part
    /// at zero, except for the entries tied by the scale rule, which are
    /// projected onto a scaled simplex.
    fn project_adjacency(&self, m: &Matrix) -> Matrix {
        let n = m.nrows();
        let sym = (m + m.transpose()) * 0.5;
        let mut out = Matrix::zeros(n, n);
        let set = |out: &mut Matrix, i: usize, j: usize, v: f64| {
            out[(i, j)] = v;
            out[(j, i)] = v;
        };
        match self.scale {
            ScaleRule::FirstNodeDegreeOne => {
                let row: Vec<f64> = (1..n).map(|j| sym[(0, j)]).collect();
                let proj = project_simplex(&row, 1.0);
                for (k, v) in proj.into_iter().enumerate() {
                    set(&mut out, 0, k + 1, v);
                }
                for i in 1..n {
                    for j in (i + 1)..n {
                        set(&mut out, i, j, sym[(i, j)].max(0.0));
                    }
                }
            }
            ScaleRule::TotalWeightN => {
                let mut upper = Vec::with_capacity(n * (n - 1) / 2);
                for i in 0..n {
                    for j in (i + 1)..n {
                        upper.push(sym[(i, j)]);
                    }
                }
                let proj = project_simplex(&upper, n as f64 / 2.0);
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        set(&mut out, i, j, proj[k]);
                        k += 1;
                    }
                }
            }
        }
        out
    }
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = z}`.
pub fn project_simplex(v: &[f64], z: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - z) / (k as f64 + 1.0);
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// One closed convex set inside Dykstra's cyclic projections.
#[derive(Debug, Clone)]
enum Piece {
    Symmetric,
    /// Entry bounds: off-diagonal within `[off_lo, off_hi]`, diagonal within
    /// `[diag_lo, diag_hi]`.
    Bounds {
        off_lo: f64,
        off_hi: f64,
        diag_lo: f64,
        diag_hi: f64,
    },
    /// `<g, S> = c`.
    Hyperplane { g: Matrix, c: f64 },
    /// Symmetric, zero row sums, trace fixed.
    LaplacianAffine { trace: f64 },
}

impl Piece {
    fn project(&self, m: &Matrix) -> Matrix {
        match self {
            Piece::Symmetric => (m + m.transpose()) * 0.5,
            Piece::Bounds {
                off_lo,
                off_hi,
                diag_lo,
                diag_hi,
            } => {
                let mut out = m.clone();
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        let (lo, hi) = if i == j { (*diag_lo, *diag_hi) } else { (*off_lo, *off_hi) };
                        out[(i, j)] = out[(i, j)].clamp(lo, hi);
                    }
                }
                out
            }
            Piece::Hyperplane { g, c } => {
                let gg = g.norm_squared();
                m + g * ((c - g.dot(m)) / gg)
            }
            Piece::LaplacianAffine { trace } => {
                let n = m.nrows();
                let nf = n as f64;
                let j = Matrix::identity(n, n) - Matrix::from_element(n, n, 1.0 / nf);
                let sym = (m + m.transpose()) * 0.5;
                let base = &j * sym * &j;
                let shift = (trace - base.trace()) / (nf - 1.0);
                base + j * shift
            }
        }
    }
}

fn pieces(set: &ShiftConstraintSet, n: usize) -> Vec<Piece> {
    match set.kind {
        ConstraintKind::AdjacencySet => {
            let (g, c) = set.scale_functional(n);
            vec![
                Piece::Symmetric,
                Piece::Bounds {
                    off_lo: 0.0,
                    off_hi: f64::INFINITY,
                    diag_lo: 0.0,
                    diag_hi: 0.0,
                },
                Piece::Hyperplane { g, c },
            ]
        }
        ConstraintKind::LaplacianSet => vec![
            Piece::LaplacianAffine { trace: n as f64 },
            Piece::Bounds {
                off_lo: f64::NEG_INFINITY,
                off_hi: 0.0,
                diag_lo: f64::NEG_INFINITY,
                diag_hi: f64::INFINITY,
            },
        ],
    }
}

/// Euclidean projection onto a shift constraint set by Dykstra's
/// alternating projections.
pub fn dykstra_project(s0: &Matrix, set: &ShiftConstraintSet, config: &SolverConfig) -> Result<Matrix> {
    let n = s0.nrows();
    if n < 2 || !s0.is_square() {
        return Err(Error::BadDimension {
            expected: n.max(2),
            got: s0.ncols(),
        });
    }
    let pieces = pieces(set, n);
    let mut x = s0.clone();
    let mut incr: Vec<Matrix> = vec![Matrix::zeros(n, n); pieces.len()];
    let scale = s0.amax().max(1.0);
    let cycles = config.max_iters.max(20_000);
    for _ in 0..cycles {
        let start = x.clone();
        for (piece, p) in pieces.iter().zip(incr.iter_mut()) {
            let shifted = &x + &*p;
            let y = piece.project(&shifted);
            *p = shifted - &y;
            x = y;
        }
        let moved = (&x - &start).amax();
        if moved <= 1e-14 * scale && set.violation(&x) <= 1e-10 * scale {
            break;
        }
    }
    let viol = set.violation(&x);
    if viol > 1e-6 * scale {
        return Err(Error::Infeasible(format!(
            "alternating projections stalled with violation {viol:.3e}"
        )));
    }
    // final cleanup: exact symmetry and sign pattern
    x = (&x + x.transpose()) * 0.5;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simplex_projection_basics() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5], 1.0), vec![0.2, 0.3, 0.5]);
        let p = project_simplex(&[2.0, 0.0, -1.0], 1.0);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let p = project_simplex(&[0.0, 0.0], 1.0);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let set = ShiftConstraintSet::adjacency(ScaleRule::FirstNodeDegreeOne);
        let s = Matrix::from_row_slice(3, 3, &[0.0, 0.4, 0.6, 0.4, 0.0, 2.0, 0.6, 2.0, 0.0]);
        let cfg = SolverConfig::default();
        assert_abs_diff_eq!(dykstra_project(&s, &set, &cfg).unwrap(), s, epsilon = 1e-9);
        assert_abs_diff_eq!(set.project(&s, &cfg).unwrap(), s, epsilon = 1e-15);
    }

    #[test]
    fn negative_identity_projects_to_valid_adjacency() {
        let set = ShiftConstraintSet::adjacency(ScaleRule::TotalWeightN);
        let out = dykstra_project(&(-Matrix::identity(4, 4)), &set, &SolverConfig::default()).unwrap();
        assert!(set.violation(&out) <= 1e-8);
        for i in 0..4 {
            assert!(out[(i, i)].abs() <= 1e-12);
        }
        assert!(out.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn dykstra_matches_closed_form() {
        let m = Matrix::from_row_slice(
            4,
            4,
            &[0.3, -0.2, 1.1, 0.4, 0.5, 2.0, -0.7, 0.9, 0.0, 0.2, -1.0, 0.3, 1.5, -0.4, 0.8, 0.1],
        );
        let cfg = SolverConfig::default();
        for rule in [ScaleRule::FirstNodeDegreeOne, ScaleRule::TotalWeightN] {
            let set = ShiftConstraintSet::adjacency(rule);
            let a = dykstra_project(&m, &set, &cfg).unwrap();
            let b = set.project(&m, &cfg).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn laplacian_projection_is_valid() {
        let set = ShiftConstraintSet::laplacian();
        let m = Matrix::from_row_slice(3, 3, &[1.0, 0.5, -2.0, 0.5, 0.0, -1.0, -2.0, -1.0, 4.0]);
        let l = set.project(&m, &SolverConfig::default()).unwrap();
        assert!(set.violation(&l) <= 1e-8);
        assert_abs_diff_eq!(l.trace(), 3.0, epsilon = 1e-8);
    }
}
