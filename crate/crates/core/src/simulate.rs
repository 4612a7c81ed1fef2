//! Seeded synthetic data: random graphs, Gaussian Markov random fields,
//! diffusion processes, smooth factor-model signals and SEM cascades.

use std::collections::VecDeque;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    eigendecompose, filter_matrix, max_asymmetry, FilterSpec, Matrix, ShiftKind, ShiftOperator, SignalSet, Vector,
};

/// Maximum number of redraws when a connected graph is requested.
pub const CONNECT_TRIES: usize = 1000;

/// Seed plus generator name. Equal specs give bit-identical streams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub generator: String,
}

impl RngSpec {
    pub const GENERATOR: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        Self { seed, generator: Self::GENERATOR.to_string() }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Independent stream `stream` under the same seed, for per-task
    /// generators that must not depend on scheduling.
    pub fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(stream);
        rng
    }
}

impl Default for RngSpec {
    fn default() -> Self {
        Self::new(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum WeightDist {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Default for WeightDist {
    fn default() -> Self {
        WeightDist::Uniform { lo: 0.5, hi: 1.5 }
    }
}

impl WeightDist {
    fn validate(&self) -> Result<()> {
        match *self {
            WeightDist::Constant { value } if value.is_finite() && value >= 0.0 => Ok(()),
            WeightDist::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi => Ok(()),
            other => Err(Error::BadParameter(format!("invalid weight distribution {other:?}"))),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightDist::Constant { value } => value,
            WeightDist::Uniform { lo, hi } if lo == hi => lo,
            WeightDist::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

/// True when every vertex is reachable from vertex 0 through nonzero
/// entries of `w` (treated as undirected).
pub fn is_connected(w: &Matrix) -> bool {
    let n = w.nrows();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && (w[(i, j)] != 0.0 || w[(j, i)] != 0.0) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Erdos-Renyi adjacency: each pair is an edge independently with
/// probability `p_edge`, weighted by a draw from `weights`.
pub fn gen_er_graph<R: Rng + ?Sized>(
    n: usize,
    p_edge: f64,
    weights: WeightDist,
    require_connected: bool,
    rng: &mut R,
) -> Result<ShiftOperator> {
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(Error::BadParameter(format!("edge probability {p_edge} outside [0, 1]")));
    }
    weights.validate()?;
    let tries = if require_connected { CONNECT_TRIES } else { 1 };
    for _ in 0..tries {
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p_edge {
                    let v = weights.draw(rng);
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
        }
        if !require_connected || is_connected(&w) {
            return ShiftOperator::new(w, ShiftKind::Adjacency, false);
        }
    }
    Err(Error::CannotConnect(CONNECT_TRIES))
}

/// `P` i.i.d. standard normal columns of length `n`.
pub fn standard_normal<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

/// Symmetric square root `V diag(sqrt(max(l, 0))) V^T` of a PSD matrix.
/// Fails if an eigenvalue is below `-1e-9` times the spectral scale.
pub fn psd_factor(cov: &Matrix) -> Result<Matrix> {
    if !cov.is_square() {
        return Err(Error::BadDimension { expected: cov.nrows(), got: cov.ncols() });
    }
    let scale = cov.amax().max(1.0);
    if max_asymmetry(cov) > 1e-10 * scale {
        return Err(Error::NotSymmetric(max_asymmetry(cov)));
    }
    let eig = SymmetricEigen::new((cov + cov.transpose()) * 0.5);
    if eig.eigenvalues.min() < -1e-9 * scale {
        return Err(Error::BadInput(format!("covariance has eigenvalue {:.3e}", eig.eigenvalues.min())));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(scaled_outer(&eig.eigenvectors, &roots))
}

/// `V diag(d) V^T`.
fn scaled_outer(v: &Matrix, d: &Vector) -> Matrix {
    let scaled = Matrix::from_fn(v.nrows(), v.ncols(), |i, k| v[(i, k)] * d[k]);
    scaled * v.transpose()
}

/// Samples `p` columns from `Normal(0, Theta^{-1})`.
pub fn sample_gmrf<R: Rng + ?Sized>(theta: &Matrix, p: usize, rng: &mut R) -> Result<SignalSet> {
    if !theta.is_square() {
        return Err(Error::BadDimension { expected: theta.nrows(), got: theta.ncols() });
    }
    let scale = theta.amax().max(1.0);
    if max_asymmetry(theta) > 1e-10 * scale {
        return Err(Error::NotSymmetric(max_asymmetry(theta)));
    }
    let eig = SymmetricEigen::new((theta + theta.transpose()) * 0.5);
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let factor = scaled_outer(&eig.eigenvectors, &eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    SignalSet::new(factor * standard_normal(theta.nrows(), p, rng))
}

/// Input covariance of a diffusion process.
#[derive(Debug, Clone, PartialEq)]
pub enum InputCov {
    White,
    Matrix(Matrix),
}

/// Ensemble covariance `H Sigma_w H^T` of the diffused process.
pub fn diffusion_covariance(s: &ShiftOperator, h: &FilterSpec, input_cov: &InputCov) -> Result<Matrix> {
    let hm = filter_matrix(s, h)?;
    Ok(match input_cov {
        InputCov::White => &hm * hm.transpose(),
        InputCov::Matrix(c) => {
            check_input_dim(c, s.n())?;
            &hm * c * hm.transpose()
        }
    })
}

fn check_input_dim(c: &Matrix, n: usize) -> Result<()> {
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::BadDimension { expected: n, got: c.nrows() });
    }
    Ok(())
}

/// Output of the graph filter `H = sum_l h_l S^l` driven by Gaussian
/// input with covariance `input_cov`.
pub fn gen_diffusion<R: Rng + ?Sized>(
    s: &ShiftOperator,
    h: &FilterSpec,
    p: usize,
    input_cov: &InputCov,
    rng: &mut R,
) -> Result<SignalSet> {
    let n = s.n();
    let hm = filter_matrix(s, h)?;
    let w = match input_cov {
        InputCov::White => standard_normal(n, p, rng),
        InputCov::Matrix(c) => {
            check_input_dim(c, n)?;
            psd_factor(c)? * standard_normal(n, p, rng)
        }
    };
    SignalSet::new(hm * w)
}

/// Smooth signals from the factor model `x = V chi + eps` with
/// `chi_k ~ Normal(0, 1/lambda_k)`. Null modes of `L` are suppressed.
pub fn gen_smooth<R: Rng + ?Sized>(l: &ShiftOperator, p: usize, noise_var: f64, rng: &mut R) -> Result<SignalSet> {
    if l.kind() != ShiftKind::Laplacian {
        return Err(Error::WrongKind { expected: "laplacian", got: l.kind().name() });
    }
    if !(noise_var >= 0.0) {
        return Err(Error::BadParameter(format!("noise variance must be >= 0, got {noise_var}")));
    }
    let basis = eigendecompose(l)?;
    let n = l.n();
    let cut = 1e-8 * basis.vals.amax().max(1.0);
    let std: Vector = basis.vals.map(|lam| if lam > cut { 1.0 / lam.sqrt() } else { 0.0 });
    let nulls = std.iter().filter(|&&s| s == 0.0).count();
    if nulls > 1 {
        log::warn!("laplacian has {nulls} null modes (disconnected graph); all are suppressed");
    }
    let chi = Matrix::from_fn(n, p, |k, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * std[k]
    });
    let mut x = &basis.vecs * chi;
    if noise_var > 0.0 {
        x += standard_normal(n, p, rng) * noise_var.sqrt();
    }
    SignalSet::new(x)
}

/// Spectral radius of a (possibly nonsymmetric) square matrix.
pub fn spectral_radius(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Structural equation model `x = W x + Omega u + eps`, one column per
/// input column: `x_t = (I - W)^{-1} (Omega u_t + eps_t)`.
pub fn gen_sem<R: Rng + ?Sized>(
    w: &ShiftOperator,
    omega: &Vector,
    u: &Matrix,
    noise_var: f64,
    rng: &mut R,
) -> Result<SignalSet> {
    let n = w.n();
    if omega.len() != n {
        return Err(Error::BadDimension { expected: n, got: omega.len() });
    }
    if u.nrows() != n {
        return Err(Error::BadDimension { expected: n, got: u.nrows() });
    }
    if !(noise_var >= 0.0) {
        return Err(Error::BadParameter(format!("noise variance must be >= 0, got {noise_var}")));
    }
    let rho = spectral_radius(w.matrix());
    if rho >= 1.0 {
        return Err(Error::UnstableSem(rho));
    }
    let mut rhs = Matrix::from_fn(n, u.ncols(), |i, t| omega[i] * u[(i, t)]);
    if noise_var > 0.0 {
        rhs += standard_normal(n, u.ncols(), rng) * noise_var.sqrt();
    }
    let lu = (Matrix::identity(n, n) - w.matrix()).lu();
    let x = lu.solve(&rhs).ok_or(Error::UnstableSem(rho))?;
    SignalSet::new(x)?.with_inputs(u.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_shift;
    use approx::assert_abs_diff_eq;

    #[test]
    fn er_extremes() {
        let mut rng = RngSpec::new(1).rng();
        let empty = gen_er_graph(5, 0.0, WeightDist::default(), false, &mut rng).unwrap();
        assert_eq!(empty.matrix(), &Matrix::zeros(5, 5));
        let full = gen_er_graph(5, 1.0, WeightDist::default(), true, &mut rng).unwrap();
        assert_eq!(full.edges(0.0).len(), 10);
        assert!(full.edges(0.0).iter().all(|e| (0.5..1.5).contains(&e.2)));
    }

    #[test]
    fn er_cannot_connect() {
        let mut rng = RngSpec::new(1).rng();
        let err = gen_er_graph(5, 0.0, WeightDist::default(), true, &mut rng).unwrap_err();
        assert_eq!(err, Error::CannotConnect(CONNECT_TRIES));
        assert!(gen_er_graph(5, 1.5, WeightDist::default(), false, &mut rng).is_err());
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let spec = RngSpec::new(42);
        let a = gen_er_graph(12, 0.4, WeightDist::default(), false, &mut spec.rng()).unwrap();
        let b = gen_er_graph(12, 0.4, WeightDist::default(), false, &mut spec.rng()).unwrap();
        assert_eq!(a, b);
        let theta = Matrix::identity(3, 3) * 2.0;
        let x = sample_gmrf(&theta, 7, &mut spec.rng()).unwrap();
        let y = sample_gmrf(&theta, 7, &mut spec.rng()).unwrap();
        assert_eq!(x, y);
        assert_ne!(spec.stream(1).random::<u64>(), spec.stream(2).random::<u64>());
    }

    #[test]
    fn gmrf_rejects_indefinite() {
        let theta = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(sample_gmrf(&theta, 3, &mut RngSpec::new(0).rng()).unwrap_err(), Error::NotPositiveDefinite);
        let x = sample_gmrf(&Matrix::identity(2, 2), 1, &mut RngSpec::new(0).rng()).unwrap();
        assert_eq!(x.p(), 1);
    }

    #[test]
    fn diffusion_exact_covariance() {
        let l = build_shift(&[(0, 1, 1.0)], 2, ShiftKind::Laplacian).unwrap();
        let h = FilterSpec::new(vec![1.0, 0.5]).unwrap();
        let cov = diffusion_covariance(&l, &h, &InputCov::White).unwrap();
        assert_abs_diff_eq!(cov, Matrix::from_row_slice(2, 2, &[2.5, -1.5, -1.5, 2.5]), epsilon = 1e-12);
        let sw = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let id = FilterSpec::new(vec![1.0]).unwrap();
        assert_abs_diff_eq!(diffusion_covariance(&l, &id, &InputCov::Matrix(sw.clone())).unwrap(), sw, epsilon = 1e-14);
        assert!(gen_diffusion(&l, &h, 3, &InputCov::Matrix(Matrix::identity(3, 3)), &mut RngSpec::new(0).rng()).is_err());
    }

    #[test]
    fn identity_filter_passes_white_noise() {
        let l = build_shift(&[(0, 1, 1.0), (1, 2, 1.0)], 3, ShiftKind::Laplacian).unwrap();
        let id = FilterSpec::new(vec![1.0]).unwrap();
        let x = gen_diffusion(&l, &id, 5, &InputCov::White, &mut RngSpec::new(9).rng()).unwrap();
        assert_eq!(x.data(), &standard_normal(3, 5, &mut RngSpec::new(9).rng()));
    }

    #[test]
    fn smooth_signals_have_no_constant_mode() {
        let l = build_shift(&[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5)], 3, ShiftKind::Laplacian).unwrap();
        let x = gen_smooth(&l, 20, 0.0, &mut RngSpec::new(3).rng()).unwrap();
        for k in 0..20 {
            assert!(x.column(k).sum().abs() < 1e-12);
        }
        let a = build_shift(&[(0, 1, 1.0)], 2, ShiftKind::Adjacency).unwrap();
        assert!(matches!(gen_smooth(&a, 2, 0.0, &mut RngSpec::new(3).rng()), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn sem_noiseless() {
        let w = ShiftOperator::new(Matrix::from_row_slice(2, 2, &[0.0, 0.5, 0.2, 0.0]), ShiftKind::Generic, true)
            .unwrap();
        let u = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let x = gen_sem(&w, &Vector::from_element(2, 1.0), &u, 0.0, &mut RngSpec::new(0).rng()).unwrap();
        assert_abs_diff_eq!(x.data()[(0, 0)], 1.0 / 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(x.data()[(1, 0)], 0.2 / 0.9, epsilon = 1e-12);

        let x = gen_sem(&w, &Vector::zeros(2), &u, 0.0, &mut RngSpec::new(0).rng()).unwrap();
        assert_eq!(x.data(), &Matrix::zeros(2, 1));

        let zero = ShiftOperator::new(Matrix::zeros(2, 2), ShiftKind::Generic, true).unwrap();
        let x = gen_sem(&zero, &Vector::from_element(2, 1.0), &u, 0.0, &mut RngSpec::new(0).rng()).unwrap();
        assert_eq!(x.data(), &u);

        let unstable = ShiftOperator::new(Matrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]), ShiftKind::Generic, true)
            .unwrap();
        assert!(matches!(
            gen_sem(&unstable, &Vector::from_element(2, 1.0), &u, 0.0, &mut RngSpec::new(0).rng()),
            Err(Error::UnstableSem(_))
        ));
    }
}
