use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Matrix, Vector};

use super::projection::{project_simplex, ConstraintKind, ShiftConstraintSet};
use super::{SolveTrace, SolverConfig};

/// Criterion minimized over the admissible shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftObjective {
    /// Entrywise l1 norm (edge sparsity).
    #[default]
    L1,
    /// Half the squared Frobenius norm (small weights).
    Frobenius,
    /// Largest absolute entry (capacity-type criterion).
    Linf,
}

/// The linear subspace of shifts sharing a set of known eigenvectors:
/// `S = sum_k lambda_k v_k v_k^T + S_free` with `S_free v_k = 0`.
#[derive(Debug, Clone)]
pub struct SpectralTemplate {
    /// N x N orthonormal matrix: the first `known` columns are the fixed
    /// eigenvectors, the rest span their orthogonal complement.
    q: Matrix,
    known: usize,
}

impl SpectralTemplate {
    /// Every eigenvector is known.
    pub fn full(vecs: &Matrix) -> Result<Self> {
        Self::partial(vecs)
    }

    /// Only the orthonormal columns of `vk` are known.
    pub fn partial(vk: &Matrix) -> Result<Self> {
        let n = vk.nrows();
        let k = vk.ncols();
        if k > n {
            return Err(Error::BadDimension { expected: n, got: k });
        }
        let gram = vk.tr_mul(vk);
        let ortho_err = (&gram - Matrix::identity(k, k)).amax();
        if ortho_err > 1e-8 {
            return Err(Error::BadInput(format!(
                "template columns are not orthonormal (error {ortho_err:.3e})"
            )));
        }
        let mut q = Matrix::zeros(n, n);
        q.columns_mut(0, k).copy_from(vk);
        if k < n {
            let proj = Matrix::identity(n, n) - vk * vk.transpose();
            let eig = SymmetricEigen::new((&proj + proj.transpose()) * 0.5);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            for (slot, &src) in order.iter().take(n - k).enumerate() {
                q.set_column(k + slot, &eig.eigenvectors.column(src));
            }
        }
        Ok(Self { q, known: k })
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn known(&self) -> usize {
        self.known
    }

    pub fn basis(&self) -> &Matrix {
        &self.q
    }

    fn in_template(&self, a: usize, b: usize) -> bool {
        let k = self.known;
        if a < k || b < k {
            a == b
        } else {
            true
        }
    }

    /// Splits `r` into its template component and the rotated residual
    /// `r - template`, both in the original coordinates.
    fn split(&self, r: &Matrix) -> (Matrix, Matrix) {
        let rt = self.q.tr_mul(r) * &self.q;
        let n = self.n();
        let mut t = Matrix::zeros(n, n);
        let mut e = Matrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                if self.in_template(a, b) {
                    t[(a, b)] = rt[(a, b)];
                } else {
                    e[(a, b)] = rt[(a, b)];
                }
            }
        }
        (t, e)
    }

    fn to_original(&self, m: &Matrix) -> Matrix {
        &self.q * m * self.q.transpose()
    }

    /// Eigenvalues attached to the known eigenvectors: `v_k^T S v_k`.
    pub fn eigenvalues_of(&self, s: &Matrix) -> Vector {
        Vector::from_iterator(
            self.known,
            (0..self.known).map(|k| {
                let v = self.q.column(k);
                v.dot(&(s * v))
            }),
        )
    }

    /// Orthogonal projection of `s` onto the template subspace.
    pub fn project(&self, s: &Matrix) -> Matrix {
        let (t, _) = self.split(s);
        self.to_original(&t)
    }

    /// Distance from `s` to the template subspace.
    pub fn distance(&self, s: &Matrix) -> f64 {
        let (_, e) = self.split(s);
        e.norm()
    }

    /// Matrices spanning the template subspace.
    fn generators(&self) -> Vec<Matrix> {
        let n = self.n();
        let mut out = Vec::new();
        for k in 0..self.known {
            let v = self.q.column(k);
            out.push(v * v.transpose());
        }
        for a in self.known..n {
            for b in a..n {
                let u = self.q.column(a);
                let w = self.q.column(b);
                let mut g = u * w.transpose();
                if a != b {
                    g = &g + g.transpose();
                }
                out.push(g);
            }
        }
        out
    }

    /// Least-squares solution of linear functionals `<C_i, T(theta)> = c_i`
    /// over the template. Returns the matrix and the residual norm.
    fn solve_linear(&self, constraints: &[(Matrix, f64)]) -> (Matrix, f64) {
        let gens = self.generators();
        let rows = constraints.len();
        let cols = gens.len();
        let mut a = Matrix::zeros(rows, cols);
        let mut rhs = Vector::zeros(rows);
        for (i, (c, val)) in constraints.iter().enumerate() {
            for (j, g) in gens.iter().enumerate() {
                a[(i, j)] = c.dot(g);
            }
            rhs[i] = *val;
        }
        let svd = a.clone().svd(true, true);
        let tol = 1e-10 * svd.singular_values.max().max(1.0);
        let theta = svd.solve(&rhs, tol).unwrap_or_else(|_| Vector::zeros(cols));
        let resid = (&a * &theta - &rhs).norm();
        let n = self.n();
        let mut t = Matrix::zeros(n, n);
        for (g, th) in gens.iter().zip(theta.iter()) {
            t += g * *th;
        }
        (t, resid)
    }
}

/// Output of the spectral-template ADMM.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pub s: Matrix,
    /// Eigenvalues paired with the known eigenvectors.
    pub lambda: Vector,
    pub trace: SolveTrace,
    /// True if the final support was re-solved exactly.
    pub polished: bool,
}

fn objective_value(obj: ShiftObjective, s: &Matrix) -> f64 {
    match obj {
        ShiftObjective::L1 => s.iter().map(|v| v.abs()).sum(),
        ShiftObjective::Frobenius => 0.5 * s.norm_squared(),
        ShiftObjective::Linf => s.amax(),
    }
}

fn project_l1_ball(v: &Matrix, radius: f64) -> Matrix {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.clone();
    }
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let p = project_simplex(&abs, radius);
    Matrix::from_iterator(v.nrows(), v.ncols(), v.iter().zip(p).map(|(x, a)| a * x.signum()))
}

/// `prox_{t (f + indicator of the set)}(a)`.
fn prox_objective(
    obj: ShiftObjective,
    set: &ShiftConstraintSet,
    a: &Matrix,
    t: f64,
    config: &SolverConfig,
) -> Result<Matrix> {
    let n = a.nrows();
    match obj {
        // l1 is linear on the set, so the prox is a shifted projection
        ShiftObjective::L1 => set.project(&(a - set.l1_sign_pattern(n) * t), config),
        ShiftObjective::Frobenius => set.project(&(a / (1.0 + t)), config),
        ShiftObjective::Linf => {
            // Dykstra-like splitting for the prox of a sum
            let mut x = a.clone();
            let mut p = Matrix::zeros(n, n);
            let mut q = Matrix::zeros(n, n);
            for _ in 0..500 {
                let y = set.project(&(&x + &p), config)?;
                p = &x + &p - &y;
                let arg = &y + &q;
                let xn = &arg - project_l1_ball(&(&arg / t), 1.0) * t;
                q = &y + &q - &xn;
                let moved = (&xn - &x).amax();
                x = xn;
                if moved <= 1e-12 * a.amax().max(1.0) {
                    break;
                }
            }
            set.project(&x, config)
        }
    }
}

/// ADMM for `min f(S)` over `S` in the constraint set with
/// `||S - T||_F <= eps` for some `T` in the spectral template.
///
/// Splitting: the `S` block applies the prox of `f` plus the set indicator;
/// the `(T, E)` block is solved jointly in the template's rotated
/// coordinates, keeping template entries and projecting the remainder onto
/// the `eps` Frobenius ball.
pub fn admm_l1_spectral(
    template: &SpectralTemplate,
    eps: f64,
    set: &ShiftConstraintSet,
    objective: ShiftObjective,
    config: &SolverConfig,
) -> Result<SpectralSolution> {
    config.validate()?;
    if !(eps >= 0.0) {
        return Err(Error::BadParameter(format!("eps must be >= 0, got {eps}")));
    }
    let n = template.n();
    if n < 2 {
        return Err(Error::BadDimension { expected: 2, got: n });
    }
    if eps == 0.0 {
        let (_, resid) = template.solve_linear(&set.equalities(n));
        if resid > 1e-8 {
            return Err(Error::Infeasible(format!(
                "no shift with these eigenvectors meets the equality constraints (residual {resid:.3e})"
            )));
        }
    }

    let mut rho = config.rho;
    let mut s = Matrix::zeros(n, n);
    let mut z = Matrix::zeros(n, n); // T + E
    let mut u = Matrix::zeros(n, n);
    let mut trace = SolveTrace::default();
    let mut prev_obj = f64::INFINITY;
    for it in 0..config.max_iters {
        s = prox_objective(objective, set, &(&z - &u), 1.0 / rho, config)?;
        let r = &s + &u;
        let (tt, et) = template.split(&r);
        let et_norm = et.norm();
        let et = if et_norm > eps {
            if eps == 0.0 {
                Matrix::zeros(n, n)
            } else {
                et * (eps / et_norm)
            }
        } else {
            et
        };
        let z_prev = z;
        z = template.to_original(&tt) + template.to_original(&et);
        let resid = &s - &z;
        u += &resid;
        let primal = resid.norm();
        let dual = rho * (&z - &z_prev).norm();
        let obj = objective_value(objective, &s);
        trace.record(obj, primal, dual);
        let rel_change = (prev_obj - obj).abs() / obj.abs().max(1.0);
        prev_obj = obj;
        let scale_p = s.norm().max(z.norm()).max(1.0);
        let scale_d = (rho * u.norm()).max(1.0);
        if primal <= config.feas_tol * scale_p && dual <= config.feas_tol * scale_d && rel_change < config.tol {
            trace.converged = true;
            break;
        }
        if config.adaptive_rho && it % 10 == 9 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }

    let last_primal = trace.primal_residual.last().copied().unwrap_or(f64::INFINITY);
    // at eps = 0 feasibility was settled above, so a stall is only slow progress
    if eps > 0.0 && !trace.converged && last_primal > 1e-4 * s.norm().max(1.0) {
        return Err(Error::Infeasible(format!(
            "ADMM stalled with primal residual {last_primal:.3e}"
        )));
    }

    // the S iterate is feasible for the set
    let (mut out, polished) = match eps == 0.0 {
        true => match polish_support(template, set, objective, &s) {
            Some(p) => (p, true),
            None => (s.clone(), false),
        },
        false => (s.clone(), false),
    };
    out = (&out + out.transpose()) * 0.5;
    let lambda = template.eigenvalues_of(&out);
    Ok(SpectralSolution {
        s: out,
        lambda,
        trace,
        polished,
    })
}

/// Re-solves the equality system on the support found by ADMM. Accepted
/// only if the result is feasible, inside the template, and no worse.
fn polish_support(
    template: &SpectralTemplate,
    set: &ShiftConstraintSet,
    objective: ShiftObjective,
    s: &Matrix,
) -> Option<Matrix> {
    if objective != ShiftObjective::L1 || set.kind != ConstraintKind::AdjacencySet {
        return None;
    }
    let n = s.nrows();
    let thr = 1e-6 * s.amax().max(1e-12);
    let mut cons = set.equalities(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if s[(i, j)].abs() <= thr {
                let mut e = Matrix::zeros(n, n);
                e[(i, j)] = 1.0;
                cons.push((e, 0.0));
            }
        }
    }
    let (t, resid) = template.solve_linear(&cons);
    if resid > 1e-9 {
        return None;
    }
    let t = (&t + t.transpose()) * 0.5;
    let scale = t.amax().max(1.0);
    if set.violation(&t) > 1e-9 * scale {
        return None;
    }
    let before = objective_value(objective, s);
    let after = objective_value(objective, &t);
    // the ADMM iterate is only approximately inside the template, so its
    // objective can undercut the exact point slightly
    if after > before + 1e-4 * before.max(1.0) {
        return None;
    }
    Some(t)
}
