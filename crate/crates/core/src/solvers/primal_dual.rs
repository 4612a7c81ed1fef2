use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Matrix, Vector};

use super::projection::project_simplex;
use super::{SolveTrace, SolverConfig};

/// Edge weights larger than this are clipped; a vertex whose distances are
/// all zero would otherwise drive them to infinity under a pure barrier.
pub const WEIGHT_CAP: f64 = 1e6;

/// Degree-dependent part `g(W)` of the smoothness-based graph objective
/// `||W o Z||_1 + g(W) + beta/2 ||W||_F^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum GraphPrior {
    /// `-alpha * 1^T log(W 1)`: every vertex keeps a positive degree.
    LogBarrier { alpha: f64 },
    /// `beta/2 ||W 1||^2` with `||W||_1 = total` enforced exactly.
    DegreeQuadratic { total: f64 },
}

/// Upper-triangular pair list `(i, j)`, `i < j`, in row-major order.
fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((i, j));
        }
    }
    out
}

fn degrees(n: usize, pairs: &[(usize, usize)], w: &Vector) -> Vector {
    let mut d = Vector::zeros(n);
    for (m, &(i, j)) in pairs.iter().enumerate() {
        d[i] += w[m];
        d[j] += w[m];
    }
    d
}

fn degrees_adjoint(pairs: &[(usize, usize)], d: &Vector) -> Vector {
    Vector::from_iterator(pairs.len(), pairs.iter().map(|&(i, j)| d[i] + d[j]))
}

/// Power-iteration estimate of the norm of the map from upper-triangular
/// weights to vertex degrees.
pub fn degree_operator_norm(n: usize, iters: usize) -> f64 {
    let p = pairs(n);
    if p.is_empty() {
        return 0.0;
    }
    let mut w = Vector::from_iterator(p.len(), (0..p.len()).map(|m| 1.0 + 1e-3 * (m % 7) as f64));
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let next = degrees_adjoint(&p, &degrees(n, &p, &w));
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        est = (norm / w.norm()).sqrt();
        w = next / norm;
    }
    est
}

fn to_matrix(n: usize, pairs: &[(usize, usize)], w: &Vector) -> Matrix {
    let mut out = Matrix::zeros(n, n);
    for (m, &(i, j)) in pairs.iter().enumerate() {
        out[(i, j)] = w[m];
        out[(j, i)] = w[m];
    }
    out
}

fn upper(n: usize, pairs: &[(usize, usize)], m: &Matrix) -> Vector {
    let _ = n;
    Vector::from_iterator(pairs.len(), pairs.iter().map(|&(i, j)| m[(i, j)]))
}

/// Objective `||W o Z||_1 + g(W) + beta/2 ||W||_F^2` evaluated on a
/// symmetric weight matrix. Infinite when the barrier sees a zero degree.
pub fn graph_objective(z: &Matrix, w: &Matrix, prior: GraphPrior, beta: f64) -> f64 {
    let n = z.nrows();
    let fit: f64 = z.component_mul(w).iter().map(|v| v.abs()).sum();
    let deg = Vector::from_iterator(n, (0..n).map(|i| w.row(i).sum() - w[(i, i)]));
    let g = match prior {
        GraphPrior::LogBarrier { alpha } => {
            if deg.iter().any(|&d| d <= 0.0) {
                return f64::INFINITY;
            }
            -alpha * deg.iter().map(|d| d.ln()).sum::<f64>()
        }
        GraphPrior::DegreeQuadratic { .. } => 0.5 * beta * deg.norm_squared(),
    };
    fit + g + 0.5 * beta * w.norm_squared()
}

/// Primal-dual (Chambolle-Pock) solver over the vector `w` of
/// upper-triangular edge weights, dualizing the degree map `d = S w`.
///
/// The primal prox handles `2 z^T w + beta ||w||^2` together with
/// nonnegativity (and the weight-sum constraint for
/// [`GraphPrior::DegreeQuadratic`]); the dual prox is the conjugate of the
/// degree term. Step sizes are `step_scale / ||S||`.
pub fn primal_dual_graph(
    z: &Matrix,
    prior: GraphPrior,
    beta: f64,
    warm: Option<&Matrix>,
    config: &SolverConfig,
) -> Result<(Matrix, SolveTrace)> {
    config.validate()?;
    let n = z.nrows();
    if !z.is_square() || n < 2 {
        return Err(Error::BadDimension { expected: n.max(2), got: z.ncols() });
    }
    if z.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::BadInput("distance matrix must be finite and nonnegative".into()));
    }
    if !(beta >= 0.0) {
        return Err(Error::BadParameter(format!("beta must be >= 0, got {beta}")));
    }
    match prior {
        GraphPrior::LogBarrier { alpha } if !(alpha >= 0.0) => {
            return Err(Error::BadParameter(format!("alpha must be >= 0, got {alpha}")))
        }
        GraphPrior::DegreeQuadratic { total } if !(total > 0.0) => {
            return Err(Error::BadParameter(format!("total weight must be > 0, got {total}")))
        }
        _ => {}
    }
    let p = pairs(n);
    let m = p.len();
    let zv = upper(n, &p, &((z + z.transpose()) * 0.5));
    let mut trace = SolveTrace::default();

    if let GraphPrior::LogBarrier { alpha } = prior {
        if alpha == 0.0 && beta == 0.0 {
            log::warn!("alpha = beta = 0: the empty graph is optimal");
            trace.converged = true;
            return Ok((Matrix::zeros(n, n), trace));
        }
    }

    let k_norm = degree_operator_norm(n, config.power_iters);
    let tau = config.step_scale / k_norm;
    let sigma = tau;

    let simplex_total = match prior {
        GraphPrior::DegreeQuadratic { total } => Some(total / 2.0),
        GraphPrior::LogBarrier { .. } => None,
    };
    let prox_primal = |v: &Vector| -> Vector {
        let shrunk = (v - &zv * (2.0 * tau)) / (1.0 + 2.0 * tau * beta);
        match simplex_total {
            Some(t) => Vector::from_vec(project_simplex(shrunk.as_slice(), t)),
            None => shrunk.map(|x| x.clamp(0.0, WEIGHT_CAP)),
        }
    };
    let prox_dual = |u: &Vector| -> Vector {
        match prior {
            GraphPrior::LogBarrier { alpha } => u.map(|x| 0.5 * (x - (x * x + 4.0 * alpha * sigma).sqrt())),
            GraphPrior::DegreeQuadratic { .. } => {
                if beta > 0.0 {
                    u / (1.0 + sigma / beta)
                } else {
                    Vector::zeros(u.len())
                }
            }
        }
    };
    let gradient = |w: &Vector| -> Vector {
        let d = degrees(n, &p, w);
        let dg = match prior {
            GraphPrior::LogBarrier { alpha } => d.map(|x| if x > 0.0 { -alpha / x } else { f64::NEG_INFINITY }),
            GraphPrior::DegreeQuadratic { .. } => d * beta,
        };
        &zv * 2.0 + w * (2.0 * beta) + degrees_adjoint(&p, &dg)
    };
    let kkt = |w: &Vector| -> f64 {
        let g = gradient(w);
        let stepped = w - g;
        let proj = match simplex_total {
            Some(t) => Vector::from_vec(project_simplex(stepped.as_slice(), t)),
            None => stepped.map(|x| x.clamp(0.0, WEIGHT_CAP)),
        };
        let r = (w - proj).amax();
        if r.is_nan() {
            f64::INFINITY
        } else {
            r
        }
    };

    let mut w = match warm {
        Some(wm) if wm.nrows() == n => upper(n, &p, wm),
        _ => match simplex_total {
            Some(t) => Vector::from_element(m, t / m as f64),
            None => Vector::from_element(m, 1.0),
        },
    };
    if let Some(t) = simplex_total {
        w = Vector::from_vec(project_simplex(w.as_slice(), t));
    }
    let mut v = Vector::zeros(n);
    let scale = (zv.amax() * 2.0).max(1.0);
    for it in 0..config.max_iters {
        let w_next = prox_primal(&(&w - degrees_adjoint(&p, &v) * tau));
        let w_bar = &w_next * 2.0 - &w;
        let v_next = prox_dual(&(&v + degrees(n, &p, &w_bar) * sigma));
        let dw = (&w_next - &w).norm();
        let dv = (&v_next - &v).norm();
        w = w_next;
        v = v_next;
        let obj = graph_objective(z, &to_matrix(n, &p, &w), prior, beta);
        trace.record(obj, dw / tau, dv / sigma);
        if it % 10 == 9 || it + 1 == config.max_iters {
            let small_steps = dw <= config.tol * w.norm().max(1.0) && dv <= config.tol * v.norm().max(1.0);
            if small_steps || kkt(&w) <= config.feas_tol * scale {
                if kkt(&w) <= config.feas_tol * scale {
                    trace.converged = true;
                    break;
                }
            }
        }
    }
    if w.iter().any(|&x| x >= WEIGHT_CAP) {
        log::warn!("edge weights hit the cap {WEIGHT_CAP:e}; the problem is degenerate");
    }
    Ok((to_matrix(n, &p, &w), trace))
}

/// Projected-gradient KKT residual of the graph objective, for checks and
/// diagnostics.
pub fn graph_kkt_residual(z: &Matrix, w: &Matrix, prior: GraphPrior, beta: f64) -> f64 {
    let n = z.nrows();
    let p = pairs(n);
    let wv = upper(n, &p, w);
    let zv = upper(n, &p, z);
    let d = degrees(n, &p, &wv);
    let dg = match prior {
        GraphPrior::LogBarrier { alpha } => d.map(|x| -alpha / x),
        GraphPrior::DegreeQuadratic { .. } => d * beta,
    };
    let g = &zv * 2.0 + &wv * (2.0 * beta) + degrees_adjoint(&p, &dg);
    let stepped = &wv - g;
    let proj = match prior {
        GraphPrior::DegreeQuadratic { total } => Vector::from_vec(project_simplex(stepped.as_slice(), total / 2.0)),
        GraphPrior::LogBarrier { .. } => stepped.map(|x| x.max(0.0)),
    };
    (wv - proj).amax()
}
