//! Topology identification from the eigenvectors of second-order statistics,
//! plus graph-filter identification when the input covariance is known.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Matrix, SignalSet, SpectralBasis, Vector};
use crate::par;
use crate::solvers::{admm_l1_spectral, ShiftConstraintSet, ShiftObjective, SolveTrace, SolverConfig, SpectralTemplate};
use crate::statnet::sample_covariance;

/// Largest graph accepted by the exhaustive sign search.
pub const SIGN_SEARCH_MAX_N: usize = 16;
/// Joint enumeration is used up to this many free sign bits.
const JOINT_BITS_MAX: usize = 20;
const CLIP_TOL: f64 = 1e-10;
/// Multiple of [`eps_min`] used when no tolerance is given.
pub const DEFAULT_EPS_FACTOR: f64 = 2.0;

/// Eigenbasis of the uncentered sample covariance. Degenerate eigenvalue
/// clusters are flagged in `degenerate_blocks`.
pub fn estimate_eigenbasis(x: &SignalSet) -> Result<SpectralBasis> {
    covariance_eigenbasis(&sample_covariance(x, false)?)
}

/// Eigenbasis of an exact or estimated covariance.
pub fn covariance_eigenbasis(cov: &Matrix) -> Result<SpectralBasis> {
    SpectralBasis::from_symmetric(cov)
}

/// Shift recovered from a spectral template.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub s: Matrix,
    /// Eigenvalues paired with `known_modes`.
    pub lambda: Vector,
    /// Indices (into the input basis) of the eigenvectors that were imposed.
    pub known_modes: Vec<usize>,
    pub trace: SolveTrace,
}

/// Sparsest (or smallest, per `objective`) shift in `set` within Frobenius
/// distance `eps` of a matrix with eigenvectors `basis`. Eigenvectors in
/// degenerate blocks are dropped and only the rest are imposed.
pub fn infer_shift(
    basis: &SpectralBasis,
    set: &ShiftConstraintSet,
    eps: f64,
    objective: ShiftObjective,
    config: &SolverConfig,
) -> Result<SpectralEstimate> {
    let known_modes = unambiguous_modes(basis);
    if known_modes.len() < basis.n() {
        log::info!("{} eigenvectors sit in degenerate blocks and are left free", basis.n() - known_modes.len());
    }
    let template = SpectralTemplate::partial(&basis.vecs.select_columns(&known_modes))?;
    let sol = admm_l1_spectral(&template, eps, set, objective, config)?;
    Ok(SpectralEstimate { s: sol.s, lambda: sol.lambda, known_modes, trace: sol.trace })
}

fn unambiguous_modes(basis: &SpectralBasis) -> Vec<usize> {
    basis.ambiguous_modes().iter().enumerate().filter(|(_, &a)| !a).map(|(k, _)| k).collect()
}

/// Sparsest shift in `set` having the orthonormal columns of `vk` as
/// eigenvectors, the remaining spectrum left free.
pub fn infer_shift_partial(vk: &Matrix, set: &ShiftConstraintSet, config: &SolverConfig) -> Result<(Matrix, SolveTrace)> {
    let template = SpectralTemplate::partial(vk)?;
    let sol = admm_l1_spectral(&template, 0.0, set, ShiftObjective::L1, config)?;
    Ok((sol.s, sol.trace))
}

/// Upper bound on the distance between the constraint set and the template
/// spanned by `basis`. Minimizes `0.5 dist(S, template)^2` over the set by
/// accelerated projected gradient, which is alternating projection with
/// momentum. The smallest feasible tolerance for [`infer_shift`] is at most
/// the returned value.
pub fn eps_min(basis: &SpectralBasis, set: &ShiftConstraintSet, config: &SolverConfig) -> Result<f64> {
    let known = unambiguous_modes(basis);
    let template = SpectralTemplate::partial(&basis.vecs.select_columns(&known))?;
    let n = basis.n();
    let mut s = set.project(&template.project(&set.project(&Matrix::zeros(n, n), config)?), config)?;
    let mut y = s.clone();
    let mut t = 1.0f64;
    let mut best = template.distance(&s);
    for _ in 0..config.max_iters {
        let s_next = set.project(&template.project(&y), config)?;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved = (&s_next - &s).norm();
        y = &s_next + (&s_next - &s) * ((t - 1.0) / t_next);
        s = s_next;
        t = t_next;
        let d = template.distance(&s);
        if d > best {
            y = s.clone();
            t = 1.0;
        }
        best = best.min(d);
        if moved <= config.tol * s.norm().max(1.0) {
            break;
        }
    }
    Ok(best)
}

/// Default tolerance for noisy eigenvectors: `factor` times [`eps_min`].
pub fn default_eps(basis: &SpectralBasis, set: &ShiftConstraintSet, factor: f64, config: &SolverConfig) -> Result<f64> {
    if !(factor >= 1.0) {
        return Err(Error::BadParameter(format!("eps factor must be >= 1, got {factor}")));
    }
    Ok(factor * eps_min(basis, set, config)?)
}

/// Runs [`infer_shift`] at each tolerance in `grid` and keeps the estimate
/// with the lowest `score`. Infeasible grid points are skipped.
pub fn eps_grid_search<F>(
    basis: &SpectralBasis,
    set: &ShiftConstraintSet,
    grid: &[f64],
    objective: ShiftObjective,
    config: &SolverConfig,
    score: F,
) -> Result<(f64, SpectralEstimate)>
where
    F: Fn(&Matrix) -> f64 + Sync,
{
    let fits = par::map_slice(grid, config.parallel, |&eps| {
        infer_shift(basis, set, eps, objective, config).map(|est| (eps, score(&est.s), est))
    });
    let mut best: Option<(f64, f64, SpectralEstimate)> = None;
    let mut last_err = None;
    for fit in fits {
        match fit {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.1 < b.1) {
                    best = Some(f);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((eps, _, est)) => Ok((eps, est)),
        None => Err(last_err.unwrap_or_else(|| Error::BadInput("empty eps grid".into()))),
    }
}

/// Eigenvectors of `t` fed to [`infer_shift`] with the l1 objective.
pub fn network_deconvolve(
    t: &Matrix,
    set: &ShiftConstraintSet,
    eps: f64,
    config: &SolverConfig,
) -> Result<SpectralEstimate> {
    let basis = SpectralBasis::from_symmetric(t)?;
    infer_shift(&basis, set, eps, ShiftObjective::L1, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterProvenance {
    ClosedForm,
    LeastSquares,
    SignSearch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterEstimate {
    pub h: Matrix,
    pub psd: bool,
    pub provenance: FilterProvenance,
}

impl FilterEstimate {
    fn new(h: Matrix, provenance: FilterProvenance) -> Self {
        let h = (&h + h.transpose()) * 0.5;
        let psd = SymmetricEigen::new(h.clone()).eigenvalues.min() >= -1e-8 * h.amax().max(1.0);
        Self { h, psd, provenance }
    }
}

/// `V f(diag) V^T` with eigenvalues clipped at zero.
fn psd_fn(m: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.min() < -CLIP_TOL * scale {
        log::warn!("clipping eigenvalue {:.3e} of a matrix expected to be PSD", eig.eigenvalues.min());
    }
    let d = eig.eigenvalues.map(|l| f(l.max(0.0)));
    let scaled = Matrix::from_fn(m.nrows(), m.ncols(), |i, k| eig.eigenvectors[(i, k)] * d[k]);
    scaled * eig.eigenvectors.transpose()
}

/// Square root and inverse square root of a positive-definite covariance.
fn pd_roots(sw: &Matrix) -> Result<(Matrix, Matrix)> {
    if !sw.is_square() {
        return Err(Error::BadDimension { expected: sw.nrows(), got: sw.ncols() });
    }
    let eig = SymmetricEigen::new((sw + sw.transpose()) * 0.5);
    let max = eig.eigenvalues.amax();
    if !(eig.eigenvalues.min() > 1e-12 * max) {
        return Err(Error::SingularInputCovariance);
    }
    let v = &eig.eigenvectors;
    let build = |d: Vector| Matrix::from_fn(v.nrows(), v.ncols(), |i, k| v[(i, k)] * d[k]) * v.transpose();
    Ok((build(eig.eigenvalues.map(f64::sqrt)), build(eig.eigenvalues.map(|l| 1.0 / l.sqrt()))))
}

fn check_pair(sx: &Matrix, sw: &Matrix) -> Result<()> {
    if sx.shape() != sw.shape() || !sx.is_square() {
        return Err(Error::BadDimension { expected: sw.nrows(), got: sx.nrows() });
    }
    if sx.iter().chain(sw.iter()).any(|v| !v.is_finite()) {
        return Err(Error::BadInput("non-finite covariance".into()));
    }
    Ok(())
}

/// The PSD filter `H` with `H Sw H = Sx`:
/// `Sw^{-1/2} (Sw^{1/2} Sx Sw^{1/2})^{1/2} Sw^{-1/2}`.
pub fn psd_filter_recover(sx: &Matrix, sw: &Matrix) -> Result<FilterEstimate> {
    check_pair(sx, sw)?;
    let (r, r_inv) = pd_roots(sw)?;
    let mid = psd_fn(&(&r * sx * &r), f64::sqrt);
    Ok(FilterEstimate::new(&r_inv * mid * &r_inv, FilterProvenance::ClosedForm))
}

fn validate_lists(sx: &[Matrix], sw: &[Matrix]) -> Result<()> {
    if sx.is_empty() {
        return Err(Error::BadInput("at least one covariance pair is required".into()));
    }
    if sx.len() != sw.len() {
        return Err(Error::BadDimension { expected: sw.len(), got: sx.len() });
    }
    let n = sx[0].nrows();
    for (a, b) in sx.iter().zip(sw) {
        check_pair(a, b)?;
        if a.nrows() != n {
            return Err(Error::BadDimension { expected: n, got: a.nrows() });
        }
    }
    Ok(())
}

/// PSD `H` minimizing `sum_m w_m ||(R_m Sx_m R_m)^{1/2} - R_m H R_m||_F^2`
/// with `R_m = Sw_m^{1/2}`, by accelerated projected gradient. Uniform
/// weights when `weights` is `None`.
pub fn psd_filter_ls(
    sx: &[Matrix],
    sw: &[Matrix],
    weights: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<(FilterEstimate, SolveTrace)> {
    config.validate()?;
    validate_lists(sx, sw)?;
    let m = sx.len();
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != m => return Err(Error::BadDimension { expected: m, got: w.len() }),
        Some(w) if w.iter().any(|v| !(*v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 => {
            return Err(Error::BadParameter("weights must be nonnegative with a positive sum".into()))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0 / m as f64; m],
    };
    let mut roots = Vec::with_capacity(m);
    let mut targets = Vec::with_capacity(m);
    let mut lip = 0.0;
    for ((a, b), wm) in sx.iter().zip(sw).zip(&w) {
        let (r, _) = pd_roots(b)?;
        targets.push(psd_fn(&(&r * a * &r), f64::sqrt));
        let top = SymmetricEigen::new(b.clone()).eigenvalues.max();
        lip += 2.0 * wm * top * top;
        roots.push(r);
    }
    let objective = |h: &Matrix| -> f64 {
        roots.iter().zip(&targets).zip(&w).map(|((r, t), wm)| wm * (t - r * h * r).norm_squared()).sum()
    };
    let gradient = |h: &Matrix| -> Matrix {
        let n = h.nrows();
        let mut g = Matrix::zeros(n, n);
        for ((r, t), wm) in roots.iter().zip(&targets).zip(&w) {
            g += r * (r * h * r - t) * r * (2.0 * wm);
        }
        g
    };
    let step = 1.0 / lip;
    let mut h = psd_filter_recover(&sx[0], &sw[0])?.h;
    let mut y = h.clone();
    let mut t = 1.0f64;
    let mut trace = SolveTrace::default();
    let mut prev = objective(&h);
    for _ in 0..config.max_iters {
        let h_next = psd_fn(&(&y - gradient(&y) * step), |l| l);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved = (&h_next - &h).norm();
        y = &h_next + (&h_next - &h) * ((t - 1.0) / t_next);
        h = h_next;
        t = t_next;
        let obj = objective(&h);
        // restart momentum when the objective goes up
        if obj > prev {
            y = h.clone();
            t = 1.0;
        }
        trace.record(obj, moved, (prev - obj).abs());
        if moved <= config.tol * h.norm().max(1.0) {
            trace.converged = true;
            break;
        }
        prev = obj;
    }
    Ok((FilterEstimate::new(h, FilterProvenance::LeastSquares), trace))
}

/// Result of the sign search over symmetric filter candidates.
#[derive(Debug, Clone)]
pub struct SignSelection {
    pub estimate: FilterEstimate,
    /// One `+1/-1` vector per covariance pair.
    pub signs: Vec<Vec<i8>>,
    /// Value of the pairwise disagreement objective at the chosen signs.
    pub residual: f64,
    /// Number of sign configurations within tolerance of the minimum, both
    /// global signs counted.
    pub tied: usize,
    /// True when more than the global sign flip attains the minimum.
    pub ambiguous: bool,
}

/// Candidate filters of one pair: `H(b) = sum_k b_k sigma_k u_k u_k^T`.
struct SignBasis {
    /// Columns are `vec(sigma_k u_k u_k^T)`.
    atoms: Matrix,
    /// Whitening data for the greedy rule: `R` and the eigenvectors `V`.
    root: Matrix,
    vecs: Matrix,
}

impl SignBasis {
    fn new(sx: &Matrix, sw: &Matrix) -> Result<Self> {
        let (r, r_inv) = pd_roots(sw)?;
        let eig = SymmetricEigen::new(&r * sx * &r);
        let n = sx.nrows();
        let mut atoms = Matrix::zeros(n * n, n);
        for k in 0..n {
            let sigma = eig.eigenvalues[k].max(0.0).sqrt();
            let u = &r_inv * eig.eigenvectors.column(k);
            let outer = &u * u.transpose() * sigma;
            atoms.set_column(k, &Vector::from_column_slice(outer.as_slice()));
        }
        Ok(Self { atoms, root: r, vecs: eig.eigenvectors })
    }

    fn filter(&self, b: &[i8]) -> Vector {
        let coeffs = Vector::from_iterator(b.len(), b.iter().map(|&s| f64::from(s)));
        &self.atoms * coeffs
    }

    /// Signs whose filter is closest to `target` in whitened coordinates.
    fn best_signs_for(&self, target: &Vector) -> Vec<i8> {
        let n = self.vecs.nrows();
        let h = Matrix::from_column_slice(n, n, target.as_slice());
        let c = &self.root * h * &self.root;
        (0..n)
            .map(|k| {
                let v = self.vecs.column(k);
                if v.dot(&(&c * v)) < 0.0 {
                    -1
                } else {
                    1
                }
            })
            .collect()
    }
}

/// `sum_{m,m'} ||h_m - h_m'||^2 = 2M sum ||h_m||^2 - 2 ||sum h_m||^2`.
fn disagreement(h: &[Vector]) -> f64 {
    let m = h.len() as f64;
    let sq: f64 = h.iter().map(|v| v.norm_squared()).sum();
    let total = h.iter().skip(1).fold(h[0].clone(), |acc, v| acc + v);
    (2.0 * m * sq - 2.0 * total.norm_squared()).max(0.0)
}

/// Bit `j` of a configuration flips sign `j + 1` in the flattened `(m, k)`
/// order; the very first sign is pinned to `+1`.
fn decode(index: u64, n: usize, m: usize) -> Vec<Vec<i8>> {
    let mut out = vec![vec![1i8; n]; m];
    for p in 1..n * m {
        if index >> (p - 1) & 1 == 1 {
            out[p / n][p % n] = -1;
        }
    }
    out
}

fn joint_scores(bases: &[SignBasis], n: usize, parallel: bool) -> Vec<f64> {
    let m = bases.len();
    let bits = n * m - 1;
    let chunk_bits = bits.min(6);
    let low = bits - chunk_bits;
    let chunks = par::map_range(1usize << chunk_bits, parallel, |c| {
        let base = (c as u64) << low;
        let signs = decode(base, n, m);
        let mut h: Vec<Vector> = bases.iter().zip(&signs).map(|(b, s)| b.filter(s)).collect();
        let mut sq: Vec<f64> = h.iter().map(|v| v.norm_squared()).collect();
        let mut total = h.iter().skip(1).fold(h[0].clone(), |acc, v| acc + v);
        let mut flat: Vec<i8> = signs.concat();
        let mut local = vec![0.0; 1usize << low];
        let score = |sq: &[f64], total: &Vector| (2.0 * m as f64 * sq.iter().sum::<f64>() - 2.0 * total.norm_squared()).max(0.0);
        local[0] = score(&sq, &total);
        for i in 1u64..(1u64 << low) {
            let bit = i.trailing_zeros() as usize;
            let p = bit + 1;
            let (mm, k) = (p / n, p % n);
            let delta = bases[mm].atoms.column(k) * (-2.0 * f64::from(flat[p]));
            flat[p] = -flat[p];
            h[mm] += &delta;
            total += &delta;
            sq[mm] = h[mm].norm_squared();
            let gray = i ^ (i >> 1);
            local[gray as usize] = score(&sq, &total);
        }
        local
    });
    chunks.concat()
}

fn greedy_scores(bases: &[SignBasis], n: usize, parallel: bool) -> Vec<(f64, Vec<Vec<i8>>)> {
    par::map_range(1usize << (n - 1), parallel, |idx| {
        let mut first = vec![1i8; n];
        for k in 1..n {
            if idx >> (k - 1) & 1 == 1 {
                first[k] = -1;
            }
        }
        let target = bases[0].filter(&first);
        let mut signs = vec![first];
        for b in &bases[1..] {
            signs.push(b.best_signs_for(&target));
        }
        let h: Vec<Vector> = bases.iter().zip(&signs).map(|(b, s)| b.filter(s)).collect();
        (disagreement(&h), signs)
    })
}

/// Chooses one candidate per covariance pair so that the candidate filters
/// agree as closely as possible. Small problems are enumerated jointly;
/// larger ones enumerate the first pair's signs and fit the others to it.
pub fn sym_filter_select(sx: &[Matrix], sw: &[Matrix], config: &SolverConfig) -> Result<SignSelection> {
    validate_lists(sx, sw)?;
    let n = sx[0].nrows();
    if n > SIGN_SEARCH_MAX_N {
        return Err(Error::TooLarge { n, max: SIGN_SEARCH_MAX_N });
    }
    let m = sx.len();
    let bases = sx.iter().zip(sw).map(|(a, b)| SignBasis::new(a, b)).collect::<Result<Vec<_>>>()?;
    let scale: f64 = m as f64 * bases.iter().map(|b| b.atoms.norm_squared()).sum::<f64>();
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);

    let (residual, tied, mut signs) = if m == 1 {
        log::warn!("a single covariance pair cannot single out the filter; returning the PSD candidate");
        (0.0, 1usize << n, vec![vec![1i8; n]])
    } else if n * m - 1 <= JOINT_BITS_MAX {
        let scores = joint_scores(&bases, n, config.parallel);
        let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let mut winner = None;
        let mut tied = 0;
        for (idx, &s) in scores.iter().enumerate() {
            if s <= best + tol {
                tied += 2;
                winner.get_or_insert(idx);
            }
        }
        (best, tied, decode(winner.unwrap() as u64, n, m))
    } else {
        let cands = greedy_scores(&bases, n, config.parallel);
        let best = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let tied = 2 * cands.iter().filter(|c| c.0 <= best + tol).count();
        let pick = cands.into_iter().find(|c| c.0 <= best + tol).unwrap();
        (best, tied, pick.1)
    };

    let mut h = bases.iter().zip(&signs).fold(Vector::zeros(n * n), |acc, (b, s)| acc + b.filter(s)) / m as f64;
    let mut hm = Matrix::from_column_slice(n, n, h.as_slice());
    if hm.trace() < 0.0 {
        h.neg_mut();
        hm.neg_mut();
        for s in signs.iter_mut().flatten() {
            *s = -*s;
        }
    }
    Ok(SignSelection {
        estimate: FilterEstimate::new(hm, FilterProvenance::SignSearch),
        signs,
        residual,
        tied,
        ambiguous: tied > 2,
    })
}
