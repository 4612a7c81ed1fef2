use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Matrix, ShiftKind, ShiftOperator, SignalSet, Vector};
use crate::par;
use crate::solvers::{lasso_gram, LassoProblem, SolveTrace, SolverConfig};

/// How the two regressions touching a pair are combined into an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineRule {
    /// Edge if either coefficient is nonzero.
    #[default]
    Or,
    /// Edge only if both coefficients are nonzero.
    And,
}

impl std::str::FromStr for CombineRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(CombineRule::Or),
            "and" => Ok(CombineRule::And),
            other => Err(Error::Parse(format!("unknown combination rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeighborhoodFit {
    /// Unweighted symmetric adjacency.
    pub adjacency: ShiftOperator,
    /// `coefficients[(i, j)]` is the weight of `x_j` in the regression of
    /// `x_i` on the other vertices; the diagonal is zero.
    pub coefficients: Matrix,
    pub traces: Vec<SolveTrace>,
}

/// Combines a coefficient table into an unweighted adjacency.
pub fn combine_support(coefficients: &Matrix, rule: CombineRule) -> Matrix {
    let n = coefficients.nrows();
    Matrix::from_fn(n, n, |i, j| {
        let a = coefficients[(i, j)] != 0.0;
        let b = coefficients[(j, i)] != 0.0;
        let edge = match rule {
            CombineRule::Or => a || b,
            CombineRule::And => a && b,
        };
        if i != j && edge {
            1.0
        } else {
            0.0
        }
    })
}

/// Regresses each vertex on all others with an l1 penalty,
///
/// `beta_i = argmin (1/P) sum_p (x_pi - x_{p,-i}^T b)^2 + lambda ||b||_1`,
///
/// and declares edges from the supports with `rule`. The per-vertex
/// problems are independent and run in parallel when enabled.
pub fn neighborhood_lasso(
    x: &SignalSet,
    lambda: f64,
    rule: CombineRule,
    config: &SolverConfig,
) -> Result<NeighborhoodFit> {
    config.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::BadParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    if x.p() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: x.p() });
    }
    let n = x.n();
    let gram = x.data() * x.data().transpose() / x.p() as f64;
    let solve = |i: usize| -> Result<(Vector, SolveTrace)> {
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let g = gram.select_rows(&others).select_columns(&others);
        let c = Vector::from_iterator(n - 1, others.iter().map(|&j| gram[(j, i)]));
        // the 1/P-scaled square loss is twice the Gram-form quadratic
        let problem = LassoProblem { gram: &g, corr: &c, lambda: lambda / 2.0, unpenalized: None };
        lasso_gram(&problem, None, config)
    };
    let results = par::map_range(n, config.parallel, solve);
    let mut coefficients = Matrix::zeros(n, n);
    let mut traces = Vec::with_capacity(n);
    for (i, res) in results.into_iter().enumerate() {
        let (beta, trace) = res?;
        for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
            coefficients[(i, j)] = beta[k];
        }
        traces.push(trace);
    }
    let adjacency = ShiftOperator::new(combine_support(&coefficients, rule), ShiftKind::Adjacency, false)?;
    Ok(NeighborhoodFit { adjacency, coefficients, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{standard_normal, RngSpec};

    #[test]
    fn rules_on_asymmetric_support() {
        let b = Matrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, 0.0, 0.0, 0.2, 0.0, -0.1, 0.0]);
        let or = combine_support(&b, CombineRule::Or);
        let and = combine_support(&b, CombineRule::And);
        assert_eq!(or[(0, 1)], 1.0);
        assert_eq!(and[(0, 1)], 0.0);
        assert_eq!(and[(1, 2)], 1.0);
        assert_eq!(or, or.transpose());
    }

    #[test]
    fn unpenalized_gives_complete_graph() {
        let x = SignalSet::new(standard_normal(5, 50, &mut RngSpec::new(4).rng())).unwrap();
        let fit = neighborhood_lasso(&x, 0.0, CombineRule::Or, &SolverConfig::default()).unwrap();
        assert_eq!(fit.adjacency.edges(0.0).len(), 10);
    }

    #[test]
    fn parallel_matches_sequential() {
        let x = SignalSet::new(standard_normal(6, 40, &mut RngSpec::new(5).rng())).unwrap();
        let cfg = SolverConfig::default();
        let a = neighborhood_lasso(&x, 0.1, CombineRule::And, &cfg.clone().with_parallel(true)).unwrap();
        let b = neighborhood_lasso(&x, 0.1, CombineRule::And, &cfg.with_parallel(false)).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
    }
}
